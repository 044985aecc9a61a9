//! Annotation tiers and inter-annotator agreement.
//!
//! Two tiers are compared frame by frame: each frame takes the label of the
//! annotation covering its center, or [`BACKGROUND`] when none does. Cohen's
//! kappa is computed over those frame labels. The overlap ratio compares the
//! labeled time of both tiers regardless of the labels themselves.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frame label where a tier has no annotation.
pub const BACKGROUND: &str = "NONE";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub start_ms: u64,
    pub end_ms: u64,
    pub value: String,
}

impl Annotation {
    pub fn new(start_ms: u64, end_ms: u64, value: impl Into<String>) -> Self {
        Annotation { start_ms, end_ms, value: value.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tier {
    pub id: String,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TierError {
    #[error("tier {tier}: annotation {start_ms}-{end_ms} ms is empty or reversed")]
    Empty { tier: String, start_ms: u64, end_ms: u64 },
    #[error("tier {tier}: annotations at {first_end_ms} ms and {second_start_ms} ms overlap")]
    Overlap { tier: String, first_end_ms: u64, second_start_ms: u64 },
}

impl Tier {
    pub fn new(id: impl Into<String>, mut annotations: Vec<Annotation>) -> Result<Self, TierError> {
        annotations.sort_by_key(|a| (a.start_ms, a.end_ms));
        let tier = Tier { id: id.into(), annotations };
        tier.validate()?;
        Ok(tier)
    }

    /// Checks that every annotation is non-empty and that, taken in start
    /// order, no two overlap.
    pub fn validate(&self) -> Result<(), TierError> {
        for a in &self.annotations {
            if a.start_ms >= a.end_ms {
                return Err(TierError::Empty { tier: self.id.clone(), start_ms: a.start_ms, end_ms: a.end_ms });
            }
        }
        let mut sorted: Vec<&Annotation> = self.annotations.iter().collect();
        sorted.sort_by_key(|a| (a.start_ms, a.end_ms));
        for w in sorted.windows(2) {
            if w[1].start_ms < w[0].end_ms {
                return Err(TierError::Overlap {
                    tier: self.id.clone(),
                    first_end_ms: w[0].end_ms,
                    second_start_ms: w[1].start_ms,
                });
            }
        }
        Ok(())
    }

    pub fn end_ms(&self) -> u64 {
        self.annotations.iter().map(|a| a.end_ms).max().unwrap_or(0)
    }

    /// Label at time `t_ms`, treating annotations as half-open.
    pub fn label_at(&self, t_ms: f64) -> &str {
        self.annotations
            .iter()
            .find(|a| a.start_ms as f64 <= t_ms && t_ms < a.end_ms as f64)
            .map_or(BACKGROUND, |a| a.value.as_str())
    }

    /// One label per frame, sampled at frame centers from time zero to the
    /// end of the last annotation.
    pub fn rasterize(&self, frame_rate: f64, end_ms: u64) -> Vec<&str> {
        let n = frame_count(frame_rate, end_ms);
        (0..n).map(|k| self.label_at((k as f64 + 0.5) * 1000.0 / frame_rate)).collect()
    }
}

fn frame_count(frame_rate: f64, end_ms: u64) -> usize {
    libm::ceil(end_ms as f64 * frame_rate / 1000.0) as usize
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgreementError {
    #[error("frame rate must be positive, got {0}")]
    FrameRate(f64),
    #[error("both tiers are empty, kappa is undefined")]
    ZeroLength,
    #[error(transparent)]
    Tier(#[from] TierError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub frames: usize,
    pub observed: f64,
    pub expected: f64,
    pub frame_kappa: f64,
    pub overlap_ratio: f64,
    /// Frame counts keyed by (label in `a`, label in `b`).
    pub confusion: BTreeMap<(String, String), usize>,
}

/// Merged, sorted, disjoint labeled intervals.
fn coverage(tier: &Tier) -> Vec<(u64, u64)> {
    let mut iv: Vec<(u64, u64)> = tier.annotations.iter().map(|a| (a.start_ms, a.end_ms)).collect();
    iv.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (s, e) in iv {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn total(iv: &[(u64, u64)]) -> u64 {
    iv.iter().map(|(s, e)| e - s).sum()
}

fn intersection(a: &[(u64, u64)], b: &[(u64, u64)]) -> u64 {
    let (mut i, mut j, mut sum) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            sum += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    sum
}

/// Intersected labeled time over unioned labeled time, ignoring labels.
pub fn overlap_ratio(a: &Tier, b: &Tier) -> f64 {
    let (ca, cb) = (coverage(a), coverage(b));
    let inter = intersection(&ca, &cb);
    let union = total(&ca) + total(&cb) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn agreement(a: &Tier, b: &Tier, frame_rate: f64) -> Result<AgreementReport, AgreementError> {
    if !(frame_rate > 0.0 && frame_rate.is_finite()) {
        return Err(AgreementError::FrameRate(frame_rate));
    }
    a.validate()?;
    b.validate()?;
    let end_ms = a.end_ms().max(b.end_ms());
    let frames = frame_count(frame_rate, end_ms);
    if frames == 0 {
        return Err(AgreementError::ZeroLength);
    }
    let ra = a.rasterize(frame_rate, end_ms);
    let rb = b.rasterize(frame_rate, end_ms);

    let mut confusion: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut marg_a: BTreeMap<&str, usize> = BTreeMap::new();
    let mut marg_b: BTreeMap<&str, usize> = BTreeMap::new();
    let mut same = 0usize;
    for (&la, &lb) in ra.iter().zip(&rb) {
        *confusion.entry((la.to_string(), lb.to_string())).or_default() += 1;
        *marg_a.entry(la).or_default() += 1;
        *marg_b.entry(lb).or_default() += 1;
        same += (la == lb) as usize;
    }
    let n = frames as f64;
    let observed = same as f64 / n;
    let expected: f64 = marg_a
        .iter()
        .map(|(label, &ca)| ca as f64 / n * marg_b.get(label).map_or(0.0, |&cb| cb as f64 / n))
        .sum();
    let frame_kappa = if observed >= 1.0 { 1.0 } else { (observed - expected) / (1.0 - expected) };
    Ok(AgreementReport { frames, observed, expected, frame_kappa, overlap_ratio: overlap_ratio(a, b), confusion })
}
