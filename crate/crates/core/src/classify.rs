//! Certainty and uncertainty labels from detected markers.
//!
//! Scoring counts evidence: a neutral-crossing nod burst and a high speed
//! band each add one point of certainty, a non-neutral hold and a low speed
//! band each add one point of uncertainty. The larger score wins and a tie
//! leaves the segment undetermined. An event belongs to a segment when its
//! midpoint falls inside the segment's half-open interval.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::markers::{MarkerEvent, MarkerKind, SpeedBandKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EpistemicLabel {
    Cert,
    Incert,
    Undetermined,
}

impl EpistemicLabel {
    pub const ALL: [EpistemicLabel; 3] = [EpistemicLabel::Cert, EpistemicLabel::Incert, EpistemicLabel::Undetermined];

    pub fn as_str(self) -> &'static str {
        match self {
            EpistemicLabel::Cert => "CERT",
            EpistemicLabel::Incert => "INCERT",
            EpistemicLabel::Undetermined => "UNDETERMINED",
        }
    }
}

impl fmt::Display for EpistemicLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EpistemicLabel {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        EpistemicLabel::ALL.into_iter().find(|l| l.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    Manual,
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rule {
    NodNeutralCrossing,
    SpeedHigh,
    HoldNonNeutral,
    SpeedLow,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::NodNeutralCrossing => "NOD_NEUTRAL_CROSSING",
            Rule::SpeedHigh => "SPEED_HIGH",
            Rule::HoldNonNeutral => "HOLD_NON_NEUTRAL",
            Rule::SpeedLow => "SPEED_LOW",
        }
    }

    pub fn supports(self) -> EpistemicLabel {
        match self {
            Rule::NodNeutralCrossing | Rule::SpeedHigh => EpistemicLabel::Cert,
            Rule::HoldNonNeutral | Rule::SpeedLow => EpistemicLabel::Incert,
        }
    }

    const ALL: [Rule; 4] = [Rule::NodNeutralCrossing, Rule::SpeedHigh, Rule::HoldNonNeutral, Rule::SpeedLow];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Fewest cycles for a neutral-crossing burst to count as certainty evidence.
    pub min_nod_cycles: u32,
    /// Peak-to-peak amplitude, in `p`, from which a burst counts as strong.
    pub strong_peak_to_peak_p: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { min_nod_cycles: 2, strong_peak_to_peak_p: 0.625 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub rule: Rule,
    /// Index of the event in the sequence passed to [`score_segment`].
    pub event_index: usize,
    pub event: MarkerEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpistemicSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub label: EpistemicLabel,
    pub source: Source,
    pub evidence: Vec<Evidence>,
    pub cert_score: u32,
    pub incert_score: u32,
}

impl EpistemicSegment {
    pub fn manual(start_s: f64, end_s: f64, label: EpistemicLabel) -> Self {
        EpistemicSegment {
            start_s,
            end_s,
            label,
            source: Source::Manual,
            evidence: Vec::new(),
            cert_score: 0,
            incert_score: 0,
        }
    }

    pub fn contains(&self, event: &MarkerEvent) -> bool {
        midpoint_inside(self.start_s, self.end_s, event)
    }
}

fn midpoint_inside(start_s: f64, end_s: f64, event: &MarkerEvent) -> bool {
    let mid = event.midpoint();
    mid >= start_s && mid < end_s
}

fn rule_of(event: &MarkerEvent, cfg: &ClassifyConfig) -> Option<Rule> {
    match event.kind {
        MarkerKind::NodBurst { cycles, crosses_neutral: true, .. } if cycles >= cfg.min_nod_cycles => {
            Some(Rule::NodNeutralCrossing)
        }
        MarkerKind::Hold { non_neutral: true, .. } => Some(Rule::HoldNonNeutral),
        MarkerKind::SpeedBand { band: SpeedBandKind::High, .. } => Some(Rule::SpeedHigh),
        MarkerKind::SpeedBand { band: SpeedBandKind::Low, .. } => Some(Rule::SpeedLow),
        _ => None,
    }
}

pub fn label_for(cert_score: u32, incert_score: u32) -> EpistemicLabel {
    match cert_score.cmp(&incert_score) {
        core::cmp::Ordering::Greater => EpistemicLabel::Cert,
        core::cmp::Ordering::Less => EpistemicLabel::Incert,
        core::cmp::Ordering::Equal => EpistemicLabel::Undetermined,
    }
}

/// Predicted label for `[start_s, end_s)` from the events whose midpoint lies inside.
pub fn score_segment(start_s: f64, end_s: f64, events: &[MarkerEvent], cfg: &ClassifyConfig) -> EpistemicSegment {
    let mut evidence = Vec::new();
    for (i, event) in events.iter().enumerate() {
        if !midpoint_inside(start_s, end_s, event) {
            continue;
        }
        if let Some(rule) = rule_of(event, cfg) {
            evidence.push(Evidence { rule, event_index: i, event: *event });
        }
    }
    // Each rule fires at most once, however many events support it.
    let fired = |rule: Rule| evidence.iter().any(|e: &Evidence| e.rule == rule) as u32;
    let score = |label| Rule::ALL.iter().filter(|r| r.supports() == label).map(|&r| fired(r)).sum::<u32>();
    let cert_score = score(EpistemicLabel::Cert);
    let incert_score = score(EpistemicLabel::Incert);
    EpistemicSegment {
        start_s,
        end_s,
        label: label_for(cert_score, incert_score),
        source: Source::Predicted,
        evidence,
        cert_score,
        incert_score,
    }
}

/// Marker families counted per corpus cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cell {
    Nod,
    NodNeutral,
    NodStrong,
    Hold,
    HoldNonNeutral,
    SpeedHigh,
    SpeedLow,
}

impl Cell {
    pub const ALL: [Cell; 7] =
        [Cell::Nod, Cell::NodNeutral, Cell::NodStrong, Cell::Hold, Cell::HoldNonNeutral, Cell::SpeedHigh, Cell::SpeedLow];

    pub fn as_str(self) -> &'static str {
        match self {
            Cell::Nod => "nod",
            Cell::NodNeutral => "nod_neutral",
            Cell::NodStrong => "nod_strong",
            Cell::Hold => "hold",
            Cell::HoldNonNeutral => "hold_non_neutral",
            Cell::SpeedHigh => "speed_high",
            Cell::SpeedLow => "speed_low",
        }
    }

    pub fn matches(self, event: &MarkerEvent, cfg: &ClassifyConfig) -> bool {
        match (self, event.kind) {
            (Cell::Nod, MarkerKind::NodBurst { .. }) => true,
            (Cell::NodNeutral, MarkerKind::NodBurst { crosses_neutral, .. }) => crosses_neutral,
            (Cell::NodStrong, MarkerKind::NodBurst { max_peak_to_peak_p, .. }) => {
                max_peak_to_peak_p >= cfg.strong_peak_to_peak_p
            }
            (Cell::Hold, MarkerKind::Hold { .. }) => true,
            (Cell::HoldNonNeutral, MarkerKind::Hold { non_neutral, .. }) => non_neutral,
            (Cell::SpeedHigh, MarkerKind::SpeedBand { band, .. }) => band == SpeedBandKind::High,
            (Cell::SpeedLow, MarkerKind::SpeedBand { band, .. }) => band == SpeedBandKind::Low,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub language: String,
    pub segment: EpistemicSegment,
    pub events: Vec<MarkerEvent>,
}

/// Language tag of the aggregate rows.
pub const ALL_LANGUAGES: &str = "ALL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub language: String,
    pub label: EpistemicLabel,
    pub total: usize,
    /// Segments exhibiting each [`Cell`], in [`Cell::ALL`] order.
    pub counts: [usize; 7],
}

impl SummaryRow {
    pub fn count(&self, cell: Cell) -> usize {
        self.counts[cell as usize]
    }

    pub fn fraction(&self, cell: Cell) -> String {
        format!("{}/{}", self.count(cell), self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub rows: Vec<SummaryRow>,
}

impl CorpusSummary {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, language: &str, label: EpistemicLabel) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.language == language && r.label == label)
    }

    fn header() -> Vec<String> {
        let mut h: Vec<String> = ["language", "label", "segments"].iter().map(|s| s.to_string()).collect();
        h.extend(Cell::ALL.iter().map(|c| c.as_str().to_string()));
        h
    }

    fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut v = alloc::vec![r.language.clone(), r.label.as_str().to_string(), r.total.to_string()];
                v.extend(Cell::ALL.iter().map(|&c| r.fraction(c)));
                v
            })
            .collect()
    }

    /// Aligned columns, one row per line.
    pub fn to_text(&self) -> String {
        let header = Self::header();
        let body = self.cells();
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for row in core::iter::once(&header).chain(&body) {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, &w)| {
                    let pad = w - c.chars().count();
                    let mut s = c.clone();
                    s.extend(core::iter::repeat_n(' ', pad));
                    s
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header().join(",");
        out.push('\n');
        for row in self.cells() {
            let quoted: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
            out.push_str(&quoted.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-language and aggregate counts of segments exhibiting each marker cell.
///
/// Rows are sorted by language then label; the aggregate rows come last.
pub fn summarize_corpus(entries: &[CorpusEntry], cfg: &ClassifyConfig) -> CorpusSummary {
    let mut by_key: BTreeMap<(String, EpistemicLabel), (usize, [usize; 7])> = BTreeMap::new();
    let mut all: BTreeMap<EpistemicLabel, (usize, [usize; 7])> = BTreeMap::new();
    for entry in entries {
        let inside: Vec<&MarkerEvent> = entry.events.iter().filter(|e| entry.segment.contains(e)).collect();
        let mut present = [0usize; 7];
        for cell in Cell::ALL {
            present[cell as usize] = inside.iter().any(|e| cell.matches(e, cfg)) as usize;
        }
        for slot in [
            by_key.entry((entry.language.clone(), entry.segment.label)).or_default(),
            all.entry(entry.segment.label).or_default(),
        ] {
            slot.0 += 1;
            for (acc, p) in slot.1.iter_mut().zip(present) {
                *acc += p;
            }
        }
    }
    let mut rows: Vec<SummaryRow> = by_key
        .into_iter()
        .map(|((language, label), (total, counts))| SummaryRow { language, label, total, counts })
        .collect();
    rows.extend(all.into_iter().map(|(label, (total, counts))| SummaryRow {
        language: ALL_LANGUAGES.to_string(),
        label,
        total,
        counts,
    }));
    CorpusSummary { rows }
}
