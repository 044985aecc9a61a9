//! Detectors for the three movement marker families: nod bursts, holds and
//! speed bands.
//!
//! All detectors read a normalized position series and the raw velocity
//! series aligned with it. Intervals follow the sample-slot convention: a run
//! of samples `i..=j` covers `[t_i, t_j + 1/fps)`.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{notch_of, NormalizedSeries, Notch};
use crate::kinematics::VelocitySeries;
use crate::stats::{median, quantile};

/// Swings smaller than this fraction of a burst's largest swing are the
/// half-swings entering or leaving the burst and do not count toward cycles.
const MAJOR_SWING_RATIO: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Minimum hold duration, seconds.
    pub hold_min_s: f64,
    /// Speed under which a sample counts as still, degrees/second.
    pub hold_v_max: f64,
    /// Minimum reversal, in `p`, for an excursion to count as a nod swing.
    pub nod_min_peak_to_peak: f64,
    pub speed_high: f64,
    pub speed_low: f64,
    /// Quantile of movement speed used as the speed statistic.
    pub speed_percentile: f64,
    /// Largest `p` range a hold may wobble through and still count as one hold.
    pub micro_osc_max_p2p: f64,
    /// Consecutive nod extrema closer than this belong to the same burst, seconds.
    pub burst_gap_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            hold_min_s: 2.0,
            hold_v_max: 5.0,
            nod_min_peak_to_peak: 0.0625,
            speed_high: 40.0,
            speed_low: 20.0,
            speed_percentile: 0.90,
            micro_osc_max_p2p: 0.125,
            burst_gap_s: 0.5,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkerError {
    #[error("position and velocity series are not aligned ({0})")]
    Misaligned(&'static str),
    #[error("invalid detector configuration: {0}")]
    Config(&'static str),
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), MarkerError> {
        if !(self.speed_low > 0.0 && self.speed_low < self.speed_high) {
            return Err(MarkerError::Config("need 0 < speed_low < speed_high"));
        }
        if !(self.hold_min_s > 0.0) {
            return Err(MarkerError::Config("hold_min_s must be positive"));
        }
        if !(self.hold_v_max > 0.0 && self.nod_min_peak_to_peak > 0.0 && self.micro_osc_max_p2p > 0.0) {
            return Err(MarkerError::Config("amplitudes and hold_v_max must be positive"));
        }
        if !(self.burst_gap_s > 0.0) {
            return Err(MarkerError::Config("burst_gap_s must be positive"));
        }
        if !(0.0..=1.0).contains(&self.speed_percentile) {
            return Err(MarkerError::Config("speed_percentile must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SpeedBandKind {
    High,
    Mid,
    Low,
}

impl SpeedBandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpeedBandKind::High => "HIGH",
            SpeedBandKind::Mid => "MID",
            SpeedBandKind::Low => "LOW",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MarkerKind {
    NodBurst { cycles: u32, crosses_neutral: bool, max_peak_to_peak_p: f64, peak_speed_deg_s: f64 },
    Hold { duration_s: f64, median_notch: Notch, non_neutral: bool, micro_oscillation: bool },
    SpeedBand { band: SpeedBandKind, stat_deg_s: f64 },
}

/// Marker family, in the tie order used when sorting events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    Hold,
    NodBurst,
    SpeedBand,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Hold, Family::NodBurst, Family::SpeedBand];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Hold => "HOLD",
            Family::NodBurst => "NOD",
            Family::SpeedBand => "SPEED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerEvent {
    pub kind: MarkerKind,
    pub start_s: f64,
    pub end_s: f64,
}

impl MarkerEvent {
    pub fn family(&self) -> Family {
        match self.kind {
            MarkerKind::Hold { .. } => Family::Hold,
            MarkerKind::NodBurst { .. } => Family::NodBurst,
            MarkerKind::SpeedBand { .. } => Family::SpeedBand,
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.start_s + self.end_s) / 2.0
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn iou(&self, other: &MarkerEvent) -> f64 {
        let inter = (self.end_s.min(other.end_s) - self.start_s.max(other.start_s)).max(0.0);
        let union = self.duration() + other.duration() - inter;
        if union > 0.0 {
            inter / union
        } else if self.start_s == other.start_s && self.end_s == other.end_s {
            1.0
        } else {
            0.0
        }
    }

    /// Same event with its interval moved by `dt` seconds.
    pub fn shifted(&self, dt: f64) -> MarkerEvent {
        MarkerEvent { start_s: self.start_s + dt, end_s: self.end_s + dt, ..*self }
    }
}

fn check_aligned(norm: &NormalizedSeries, vel: &VelocitySeries) -> Result<(), MarkerError> {
    if norm.len() != vel.len() {
        return Err(MarkerError::Misaligned("different lengths"));
    }
    let tol = 1e-6 / norm.fps.max(1.0);
    if norm.samples.iter().zip(&vel.samples).any(|(a, b)| libm::fabs(a.t_s - b.t_s) > tol) {
        return Err(MarkerError::Misaligned("different timestamps"));
    }
    Ok(())
}

/// Whether the slot of the sample at `t_s` lies in `[start_s, end_s)`, judged
/// by the slot center so that rounding in interval ends cannot flip it.
fn slot_in(t_s: f64, fps: f64, start_s: f64, end_s: f64) -> bool {
    let center = t_s + 0.5 / fps;
    center >= start_s && center < end_s
}

fn slot_end(norm: &NormalizedSeries, idx: usize) -> f64 {
    norm.samples[idx].t_s + 1.0 / norm.fps
}

/// Indices where the velocity changes sign, plus the first sample.
///
/// A zero next to a nonzero value counts as a change, so a still stretch
/// ending in motion contributes its last still sample.
fn sign_change_candidates(v: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    if v.is_empty() {
        return out;
    }
    out.push(0);
    for i in 0..v.len() - 1 {
        let (a, b) = (v[i], v[i + 1]);
        let change = (a > 0.0 && b <= 0.0) || (a < 0.0 && b >= 0.0) || (a == 0.0 && b != 0.0);
        if change {
            if out.last() != Some(&i) {
                out.push(i);
            }
            out.push(i + 1);
        }
    }
    out
}

enum Trend {
    Unknown { lo: usize, hi: usize },
    Rising { peak: usize },
    Falling { trough: usize },
}

/// Zigzag over the velocity sign changes: an extreme becomes a pivot once `p`
/// has reversed from it by at least `threshold`.
fn pivots(p: &[f64], v: &[f64], threshold: f64) -> (Vec<usize>, bool) {
    let candidates = sign_change_candidates(v);
    let mut out = Vec::new();
    let Some(&first) = candidates.first() else { return (out, false) };
    let mut trend = Trend::Unknown { lo: first, hi: first };
    for &c in &candidates[1..] {
        trend = match trend {
            Trend::Unknown { mut lo, mut hi } => {
                if p[c] < p[lo] {
                    lo = c;
                }
                if p[c] > p[hi] {
                    hi = c;
                }
                if p[c] - p[lo] >= threshold {
                    out.push(lo);
                    Trend::Rising { peak: c }
                } else if p[hi] - p[c] >= threshold {
                    out.push(hi);
                    Trend::Falling { trough: c }
                } else {
                    Trend::Unknown { lo, hi }
                }
            }
            Trend::Rising { peak } => {
                if p[c] > p[peak] {
                    Trend::Rising { peak: c }
                } else if p[peak] - p[c] >= threshold {
                    out.push(peak);
                    Trend::Falling { trough: c }
                } else {
                    Trend::Rising { peak }
                }
            }
            Trend::Falling { trough } => {
                if p[c] < p[trough] {
                    Trend::Falling { trough: c }
                } else if p[c] - p[trough] >= threshold {
                    out.push(trough);
                    Trend::Rising { peak: c }
                } else {
                    Trend::Falling { trough }
                }
            }
        };
    }
    // The last leg ends at its pending extreme even though nothing after it
    // reverses far enough to confirm it. That extreme is provisional.
    match trend {
        Trend::Rising { peak: last } | Trend::Falling { trough: last } => {
            out.push(last);
            (out, true)
        }
        Trend::Unknown { .. } => (out, false),
    }
}

/// A detected burst with the sample range between its first and last extremum.
struct Burst {
    event: MarkerEvent,
    first_idx: usize,
    last_idx: usize,
}

fn nod_bursts(norm: &NormalizedSeries, vel: &VelocitySeries, cfg: &DetectorConfig) -> Vec<Burst> {
    let p: Vec<f64> = norm.samples.iter().map(|s| s.p).collect();
    let v: Vec<f64> = vel.samples.iter().map(|s| s.v_deg_s).collect();
    let (pivots, provisional_tail) = pivots(&p, &v, cfg.nod_min_peak_to_peak);
    let t = |i: usize| norm.samples[i].t_s;
    let (span_start, span_end) = norm.span();

    let mut chains: Vec<Vec<usize>> = Vec::new();
    for &idx in &pivots {
        match chains.last_mut() {
            Some(chain) if t(idx) - t(*chain.last().unwrap_or(&idx)) < cfg.burst_gap_s => chain.push(idx),
            _ => chains.push(alloc::vec![idx]),
        }
    }
    // An unconfirmed final extreme only extends a burst when it ends a full
    // swing; a half-swing back to rest is dropped.
    if provisional_tail {
        if let Some(chain) = chains.last_mut().filter(|c| c.len() > 2) {
            let swing = |a: usize, b: usize| libm::fabs(p[chain[b]] - p[chain[a]]);
            let k = chain.len();
            let max_before = (1..k - 1).map(|i| swing(i - 1, i)).fold(0.0, f64::max);
            if swing(k - 2, k - 1) < MAJOR_SWING_RATIO * max_before {
                chain.pop();
            }
        }
    }

    chains
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|chain| {
            let swings: Vec<f64> = chain.windows(2).map(|w| libm::fabs(p[w[1]] - p[w[0]])).collect();
            let max_swing = swings.iter().copied().fold(0.0, f64::max);
            let major = swings.iter().filter(|&&s| s >= MAJOR_SWING_RATIO * max_swing).count() as u32;
            let cycles = major.div_ceil(2).max(1);

            let (first, last) = (chain[0], chain[chain.len() - 1]);
            let first_swing = t(chain[1]) - t(first);
            let last_swing = t(last) - t(chain[chain.len() - 2]);
            let start_s = (t(first) - first_swing / 2.0).max(span_start);
            let end_s = (t(last) + last_swing / 2.0).min(span_end);

            let crosses_neutral = norm.samples[first..=last].iter().any(|s| s.notch == Notch::Neutral);
            let peak_speed = vel.samples[first..=last]
                .iter()
                .map(|s| libm::fabs(s.v_deg_s))
                .fold(0.0, f64::max);
            Burst {
                event: MarkerEvent {
                    kind: MarkerKind::NodBurst {
                        cycles,
                        crosses_neutral,
                        max_peak_to_peak_p: max_swing,
                        peak_speed_deg_s: peak_speed,
                    },
                    start_s,
                    end_s,
                },
                first_idx: first,
                last_idx: last,
            }
        })
        .collect()
}

/// Repeated flexion/extension excursions grouped into bursts.
///
/// Extrema are taken where the velocity changes sign and kept once the
/// position reverses by at least `nod_min_peak_to_peak`. Extrema closer than
/// `burst_gap_s` chain into one burst; the burst interval extends half a swing
/// beyond its outer extrema.
pub fn detect_nods(
    norm: &NormalizedSeries,
    vel: &VelocitySeries,
    cfg: &DetectorConfig,
) -> Result<Vec<MarkerEvent>, MarkerError> {
    check_aligned(norm, vel)?;
    cfg.validate()?;
    Ok(nod_bursts(norm, vel, cfg).into_iter().map(|b| b.event).collect())
}

/// Runs of equal booleans as `(value, start, end_exclusive)`.
fn runs(mask: &[bool]) -> Vec<(bool, usize, usize)> {
    let mut out: Vec<(bool, usize, usize)> = Vec::new();
    for (i, &m) in mask.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.0 == m => r.2 = i + 1,
            _ => out.push((m, i, i + 1)),
        }
    }
    out
}

fn p_range(p: &[f64]) -> (f64, f64) {
    p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Sustained near-still postures.
///
/// Still runs (`|v| < hold_v_max`) are joined across intervening motion when
/// the joined stretch stays within `micro_osc_max_p2p` and the motion is not
/// part of a nod burst; such holds are flagged `micro_oscillation`.
pub fn detect_holds(
    norm: &NormalizedSeries,
    vel: &VelocitySeries,
    cfg: &DetectorConfig,
) -> Result<Vec<MarkerEvent>, MarkerError> {
    check_aligned(norm, vel)?;
    cfg.validate()?;
    let n = norm.len();
    let p: Vec<f64> = norm.samples.iter().map(|s| s.p).collect();
    let still: Vec<bool> = vel.samples.iter().map(|s| libm::fabs(s.v_deg_s) < cfg.hold_v_max).collect();
    let mut in_nod = alloc::vec![false; n];
    for burst in nod_bursts(norm, vel, cfg) {
        for (i, s) in norm.samples.iter().enumerate() {
            if slot_in(s.t_s, norm.fps, burst.event.start_s, burst.event.end_s) || (burst.first_idx..=burst.last_idx).contains(&i) {
                in_nod[i] = true;
            }
        }
    }
    let runs = runs(&still);
    let frame = 1.0 / norm.fps;

    let mut holds = Vec::new();
    let mut k = 0;
    while k < runs.len() {
        let (is_still, start, mut end) = runs[k];
        if !is_still {
            k += 1;
            continue;
        }
        let (mut lo, mut hi) = p_range(&p[start..end]);
        let mut micro = false;
        // Absorb `motion, still` pairs while the joined stretch stays narrow.
        while k + 2 < runs.len() {
            let (_, m_start, m_end) = runs[k + 1];
            let (_, _, s_end) = runs[k + 2];
            if in_nod[m_start..m_end].iter().any(|&x| x) {
                break;
            }
            let (mlo, mhi) = p_range(&p[m_start..s_end]);
            let (jlo, jhi) = (lo.min(mlo), hi.max(mhi));
            if jhi - jlo >= cfg.micro_osc_max_p2p {
                break;
            }
            lo = jlo;
            hi = jhi;
            end = s_end;
            micro = true;
            k += 2;
        }
        k += 1;
        let duration_s = (end - start) as f64 * frame;
        if duration_s + 1e-9 < cfg.hold_min_s {
            continue;
        }
        let median_p = median(&p[start..end]).unwrap_or(0.0);
        let median_notch = notch_of(median_p.clamp(-1.0, 1.0)).unwrap_or(Notch::Neutral);
        holds.push(MarkerEvent {
            kind: MarkerKind::Hold {
                duration_s,
                median_notch,
                non_neutral: median_notch != Notch::Neutral,
                micro_oscillation: micro,
            },
            start_s: norm.samples[start].t_s,
            end_s: slot_end(norm, end - 1),
        });
    }
    Ok(holds)
}

/// Segment-level speed statistic over the moving samples outside holds.
pub fn speed_profile(vel: &VelocitySeries, holds: &[MarkerEvent], cfg: &DetectorConfig) -> MarkerEvent {
    let moving: Vec<f64> = vel
        .samples
        .iter()
        .filter(|s| !holds.iter().any(|h| slot_in(s.t_s, vel.fps, h.start_s, h.end_s)))
        .map(|s| libm::fabs(s.v_deg_s))
        .filter(|&v| v >= cfg.hold_v_max)
        .collect();
    let stat = quantile(&moving, cfg.speed_percentile).unwrap_or(0.0);
    let band = if stat > cfg.speed_high {
        SpeedBandKind::High
    } else if stat < cfg.speed_low {
        SpeedBandKind::Low
    } else {
        SpeedBandKind::Mid
    };
    let (start_s, end_s) = match (vel.samples.first(), vel.samples.last()) {
        (Some(a), Some(b)) => (a.t_s, b.t_s + 1.0 / vel.fps),
        _ => (0.0, 0.0),
    };
    MarkerEvent { kind: MarkerKind::SpeedBand { band, stat_deg_s: stat }, start_s, end_s }
}

/// Sorts by start time, then Hold < NodBurst < SpeedBand.
///
/// Start times are compared at microsecond resolution so that rounding noise
/// in computed interval ends cannot reorder events starting together.
pub fn sort_events(events: &mut [MarkerEvent]) {
    let key = |e: &MarkerEvent| libm::round(e.start_s * 1e6) as i64;
    events.sort_by(|a, b| match key(a).cmp(&key(b)) {
        Ordering::Equal => a.family().cmp(&b.family()).then(a.start_s.total_cmp(&b.start_s)),
        o => o,
    });
}

pub fn detect_all(
    norm: &NormalizedSeries,
    vel: &VelocitySeries,
    cfg: &DetectorConfig,
) -> Result<Vec<MarkerEvent>, MarkerError> {
    let holds = detect_holds(norm, vel, cfg)?;
    let nods = detect_nods(norm, vel, cfg)?;
    let speed = speed_profile(vel, &holds, cfg);
    let mut events = holds;
    events.extend(nods);
    events.push(speed);
    sort_events(&mut events);
    Ok(events)
}
