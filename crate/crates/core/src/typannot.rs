//! Reversible ASCII encoding of articulatory transcription records.
//!
//! Grammar (canonical form, one spelling per record):
//!
//! ```text
//! record    = segment ":" dof [ ":" side ] "=" notch [ ";v" sign ] [ ";a" sign ] [ ";x" count ] "@" time "-" time
//! segment   = "COU" | "TETE" | "EPAULES" | "BUSTE"
//! dof       = "FLXEXT" | "ABDADD" | "RINREX"
//! side      = "LEFT" | "RIGHT"
//! notch     = "NEUTRAL" | sense "_" grade
//! sense     = "FLX" | "EXT"  (FLXEXT)  |  "ABD" | "ADD"  (ABDADD)  |  "RIN" | "REX"  (RINREX)
//! grade     = "PETIT" | "MOYEN" | "GRAND" | "BUTEE"
//! sign      = "+" | "-"
//! count     = nonzero-digit { digit }
//! time      = ( "0" | nonzero-digit { digit } ) "." digit digit [ nonzero-digit ]
//! ```
//!
//! Times are seconds at millisecond resolution. Two decimals are written when
//! the millisecond digit is zero, three otherwise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use core::num::NonZeroU32;

use thiserror::Error;

use crate::calibration::{Grade, NormalizedSeries, Notch};
use crate::dof::{DofId, DofKind, SegmentId, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Contrast {
    Plus,
    Minus,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ProsodicQualifier {
    pub speed: Contrast,
    pub amplitude: Contrast,
    pub repetitions: Option<NonZeroU32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypannotRecord {
    pub segment: SegmentId,
    pub dof: DofId,
    pub notch: Notch,
    pub qualifiers: ProsodicQualifier,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("{dof} cannot carry side {side} on segment {segment}")]
    IllegalSide { segment: &'static str, dof: &'static str, side: &'static str },
    #[error("interval start {start_ms} ms is not before end {end_ms} ms")]
    Interval { start_ms: u64, end_ms: u64 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("column {column}: {message}")]
pub struct DecodeError {
    /// 1-based column of the offending character.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {source}")]
pub struct RecordsError {
    pub line: usize,
    pub source: DecodeError,
}

impl TypannotRecord {
    pub fn validate(&self) -> Result<(), EncodeError> {
        if !self.dof.is_legal_on(self.segment) {
            return Err(EncodeError::IllegalSide {
                segment: self.segment.as_str(),
                dof: self.dof.kind.as_str(),
                side: self.dof.side.as_str(),
            });
        }
        if self.start_ms >= self.end_ms {
            return Err(EncodeError::Interval { start_ms: self.start_ms, end_ms: self.end_ms });
        }
        Ok(())
    }

    pub fn start_s(&self) -> f64 {
        self.start_ms as f64 / 1000.0
    }

    pub fn end_s(&self) -> f64 {
        self.end_ms as f64 / 1000.0
    }
}

fn notch_label(kind: DofKind, notch: Notch) -> String {
    match notch.split() {
        None => String::from("NEUTRAL"),
        Some((positive, grade)) => {
            let (pos, neg) = kind.senses();
            format!("{}_{}", if positive { pos } else { neg }, grade.as_str())
        }
    }
}

fn write_time(out: &mut String, ms: u64) {
    let (secs, frac) = (ms / 1000, ms % 1000);
    if frac % 10 == 0 {
        let _ = write!(out, "{}.{:02}", secs, frac / 10);
    } else {
        let _ = write!(out, "{}.{:03}", secs, frac);
    }
}

fn sign(c: Contrast) -> Option<char> {
    match c {
        Contrast::Plus => Some('+'),
        Contrast::Minus => Some('-'),
        Contrast::None => None,
    }
}

pub fn encode(record: &TypannotRecord) -> Result<String, EncodeError> {
    record.validate()?;
    let mut out = String::new();
    out.push_str(record.segment.as_str());
    out.push(':');
    out.push_str(record.dof.kind.as_str());
    if record.dof.side != Side::None {
        out.push(':');
        out.push_str(record.dof.side.as_str());
    }
    out.push('=');
    out.push_str(&notch_label(record.dof.kind, record.notch));
    let q = &record.qualifiers;
    if let Some(s) = sign(q.speed) {
        let _ = write!(out, ";v{s}");
    }
    if let Some(s) = sign(q.amplitude) {
        let _ = write!(out, ";a{s}");
    }
    if let Some(n) = q.repetitions {
        let _ = write!(out, ";x{n}");
    }
    out.push('@');
    write_time(&mut out, record.start_ms);
    out.push('-');
    write_time(&mut out, record.end_ms);
    Ok(out)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, message: impl Into<String>) -> DecodeError {
        DecodeError { column: self.pos + 1, message: message.into() }
    }

    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), DecodeError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", c as char)))
        }
    }

    /// Consumes an upper-case identifier (letters and `_`).
    fn word(&mut self) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_uppercase() || c == b'_') {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn digits(&mut self) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    fn contrast(&mut self) -> Result<Contrast, DecodeError> {
        match self.peek() {
            Some(b'+') => {
                self.pos += 1;
                Ok(Contrast::Plus)
            }
            Some(b'-') => {
                self.pos += 1;
                Ok(Contrast::Minus)
            }
            _ => Err(self.error("expected `+` or `-`")),
        }
    }

    fn time(&mut self) -> Result<u64, DecodeError> {
        let at = self.pos;
        let int = self.digits();
        if int.is_empty() || (int.len() > 1 && int.starts_with('0')) {
            self.pos = at;
            return Err(self.error("expected seconds without leading zeros"));
        }
        self.expect(b'.')?;
        let frac_at = self.pos;
        let frac = self.digits();
        let frac_ms = match frac.len() {
            2 => frac.parse::<u64>().map(|v| v * 10).ok(),
            3 if !frac.ends_with('0') => frac.parse::<u64>().ok(),
            _ => None,
        };
        let Some(frac_ms) = frac_ms else {
            self.pos = frac_at;
            return Err(self.error("expected two decimals, or three ending in a nonzero digit"));
        };
        int.parse::<u64>()
            .ok()
            .and_then(|s| s.checked_mul(1000))
            .and_then(|ms| ms.checked_add(frac_ms))
            .ok_or_else(|| {
                self.pos = at;
                self.error("time out of range")
            })
    }
}

fn parse_notch(kind: DofKind, label: &str) -> Option<Notch> {
    if label == "NEUTRAL" {
        return Some(Notch::Neutral);
    }
    let (sense, grade) = label.split_once('_')?;
    let (pos, neg) = kind.senses();
    let positive = match sense {
        s if s == pos => true,
        s if s == neg => false,
        _ => return None,
    };
    let grade = Grade::ALL.into_iter().find(|g| g.as_str() == grade)?;
    Some(Notch::from_split(positive, grade))
}

pub fn decode(text: &str) -> Result<TypannotRecord, DecodeError> {
    let mut cur = Cursor { text, pos: 0 };

    let segment = cur.word().parse::<SegmentId>().map_err(|_| DecodeError { column: 1, message: "unknown segment".into() })?;
    cur.expect(b':')?;
    let dof_at = cur.pos;
    let kind = cur.word().parse::<DofKind>().map_err(|_| DecodeError { column: dof_at + 1, message: "unknown DoF".into() })?;
    let mut side = Side::None;
    if cur.peek() == Some(b':') {
        cur.pos += 1;
        let side_at = cur.pos;
        side = match cur.word() {
            "LEFT" => Side::Left,
            "RIGHT" => Side::Right,
            _ => return Err(DecodeError { column: side_at + 1, message: "expected LEFT or RIGHT".into() }),
        };
    }
    let dof = DofId::new(kind, side);
    if !dof.is_legal_on(segment) {
        return Err(DecodeError { column: dof_at + 1, message: format!("{dof} is not allowed on {segment}") });
    }
    cur.expect(b'=')?;
    let notch_at = cur.pos;
    let notch = parse_notch(kind, cur.word())
        .ok_or_else(|| DecodeError { column: notch_at + 1, message: format!("unknown notch for {}", kind.as_str()) })?;

    let mut qualifiers = ProsodicQualifier::default();
    // Qualifiers appear at most once each, in the order v, a, x.
    let mut stage = 0;
    while cur.peek() == Some(b';') {
        cur.pos += 1;
        let tag_at = cur.pos;
        let tag = cur.peek();
        cur.pos += 1;
        match tag {
            Some(b'v') if stage < 1 => {
                qualifiers.speed = cur.contrast()?;
                stage = 1;
            }
            Some(b'a') if stage < 2 => {
                qualifiers.amplitude = cur.contrast()?;
                stage = 2;
            }
            Some(b'x') if stage < 3 => {
                let count_at = cur.pos;
                let digits = cur.digits();
                let n = (!digits.starts_with('0'))
                    .then(|| digits.parse::<u32>().ok())
                    .flatten()
                    .and_then(NonZeroU32::new)
                    .ok_or(DecodeError { column: count_at + 1, message: "expected a positive repetition count".into() })?;
                qualifiers.repetitions = Some(n);
                stage = 3;
            }
            _ => {
                return Err(DecodeError { column: tag_at + 1, message: "expected qualifier v, a or x in that order".into() })
            }
        }
    }
    cur.expect(b'@')?;
    let start_ms = cur.time()?;
    cur.expect(b'-')?;
    let end_at = cur.pos;
    let end_ms = cur.time()?;
    if cur.pos != text.len() {
        return Err(cur.error("trailing characters"));
    }
    if start_ms >= end_ms {
        return Err(DecodeError { column: end_at + 1, message: "interval end must be after start".into() });
    }
    Ok(TypannotRecord { segment, dof, notch, qualifiers, start_ms, end_ms })
}

/// LF-separated canonical encodings, with a trailing newline.
pub fn encode_records(records: &[TypannotRecord]) -> Result<String, EncodeError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&encode(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses a records file; blank lines are skipped.
pub fn decode_records(text: &str) -> Result<Vec<TypannotRecord>, RecordsError> {
    text.split('\n')
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| decode(l).map_err(|source| RecordsError { line: i + 1, source }))
        .collect()
}

fn to_ms(t_s: f64) -> u64 {
    libm::round(t_s * 1000.0).max(0.0) as u64
}

/// Constant-notch runs as `(notch, first sample, one past last sample)`.
fn notch_runs(norm: &NormalizedSeries) -> Vec<(Notch, usize, usize)> {
    let mut runs: Vec<(Notch, usize, usize)> = Vec::new();
    for (i, s) in norm.samples.iter().enumerate() {
        match runs.last_mut() {
            Some(run) if run.0 == s.notch => run.2 = i + 1,
            _ => runs.push((s.notch, i, i + 1)),
        }
    }
    runs
}

fn coalesce(runs: &mut Vec<(Notch, usize, usize)>) {
    let mut merged: Vec<(Notch, usize, usize)> = Vec::with_capacity(runs.len());
    for &run in runs.iter() {
        match merged.last_mut() {
            Some(last) if last.0 == run.0 => last.2 = run.2,
            _ => merged.push(run),
        }
    }
    *runs = merged;
}

/// Run-length encodes a normalized series into transcription records.
///
/// Runs shorter than `min_run_s` are folded, shortest first, into the
/// neighbor whose notch is nearer (the earlier neighbor on ties).
pub fn series_to_records(norm: &NormalizedSeries, min_run_s: f64) -> Vec<TypannotRecord> {
    let mut runs = notch_runs(norm);
    let frame = 1.0 / norm.fps;
    let duration = |r: &(Notch, usize, usize)| (r.2 - r.1) as f64 * frame;
    while runs.len() > 1 {
        let short = runs
            .iter()
            .enumerate()
            .filter(|(_, r)| duration(r) < min_run_s - 1e-9)
            .min_by(|(ia, a), (ib, b)| duration(a).total_cmp(&duration(b)).then(ia.cmp(ib)))
            .map(|(i, _)| i);
        let Some(i) = short else { break };
        let rank = runs[i].0.rank();
        let dist = |j: usize| (runs[j].0.rank() - rank).abs();
        let into_left = match (i.checked_sub(1), (i + 1 < runs.len()).then_some(i + 1)) {
            (Some(l), Some(r)) => dist(l) <= dist(r),
            (Some(_), None) => true,
            _ => false,
        };
        let (_, start, end) = runs.remove(i);
        if into_left {
            runs[i - 1].2 = end;
        } else {
            runs[i].1 = start;
        }
        coalesce(&mut runs);
    }

    let boundary = |idx: usize| {
        if idx < norm.samples.len() {
            norm.samples[idx].t_s
        } else {
            norm.samples[idx - 1].t_s + frame
        }
    };
    runs.iter()
        .map(|&(notch, start, end)| TypannotRecord {
            segment: norm.segment,
            dof: norm.dof,
            notch,
            qualifiers: ProsodicQualifier::default(),
            start_ms: to_ms(boundary(start)),
            end_ms: to_ms(boundary(end)),
        })
        .collect()
}
