//! Synthetic trajectories with planted, analytically known marker events.
//!
//! A [`TrajectorySpec`] is a sequence of hold, nod and ramp pieces in
//! normalized units. [`generate`] samples it, maps it to raw degrees through a
//! calibration profile and runs the same smoothing and differentiation as the
//! real pipeline. The [`GroundTruth`] is derived from the pieces alone, never
//! from the detectors, so [`evaluate`] measures detectors against an
//! independent answer.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{normalize_series, notch_of, CalibrationProfile, NormalizedSeries, Notch, NOTCH_BOUNDARIES};
use crate::kinematics::{self, AngleSample, AngleSeries, Quality, VelocitySeries};
use crate::markers::{DetectorConfig, Family, MarkerEvent, MarkerKind, SpeedBandKind};
use crate::stats::quantile;

/// Frequency of the wobble superimposed on holds, Hz.
pub const WOBBLE_HZ: f64 = 3.0;

const TILE_TOLERANCE_S: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Piece {
    HoldPiece {
        p: f64,
        duration_s: f64,
        #[serde(default)]
        wobble_p2p: f64,
    },
    NodPiece {
        center_p: f64,
        half_amp_p: f64,
        cycles: u32,
        cycle_s: f64,
    },
    RampPiece {
        p_from: f64,
        p_to: f64,
        duration_s: f64,
    },
}

impl Piece {
    pub fn duration(&self) -> f64 {
        match *self {
            Piece::HoldPiece { duration_s, .. } | Piece::RampPiece { duration_s, .. } => duration_s,
            Piece::NodPiece { cycles, cycle_s, .. } => cycles as f64 * cycle_s,
        }
    }

    /// Position and its time derivative at local time `tau`.
    fn eval(&self, tau: f64) -> (f64, f64) {
        match *self {
            Piece::HoldPiece { p, wobble_p2p, .. } => {
                let w = 2.0 * PI * WOBBLE_HZ;
                (p + wobble_p2p / 2.0 * libm::sin(w * tau), wobble_p2p / 2.0 * w * libm::cos(w * tau))
            }
            Piece::NodPiece { center_p, half_amp_p, cycle_s, .. } => {
                let w = 2.0 * PI / cycle_s;
                (center_p + half_amp_p * libm::sin(w * tau), half_amp_p * w * libm::cos(w * tau))
            }
            Piece::RampPiece { p_from, p_to, duration_s } => {
                let slope = (p_to - p_from) / duration_s;
                (p_from + slope * tau, slope)
            }
        }
    }

    fn p_range(&self) -> (f64, f64) {
        match *self {
            Piece::HoldPiece { p, wobble_p2p, .. } => (p - wobble_p2p / 2.0, p + wobble_p2p / 2.0),
            Piece::NodPiece { center_p, half_amp_p, .. } => (center_p - half_amp_p, center_p + half_amp_p),
            Piece::RampPiece { p_from, p_to, .. } => (p_from.min(p_to), p_from.max(p_to)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub fps: f64,
    pub duration_s: f64,
    pub pieces: Vec<Piece>,
    #[serde(default)]
    pub noise_sigma_p: f64,
    #[serde(default)]
    pub seed: u64,
    /// Moving-average window applied to the raw angle, frames (odd).
    #[serde(default = "default_window")]
    pub smooth_window: usize,
}

fn default_window() -> usize {
    1
}

impl TrajectorySpec {
    /// A noise-free spec whose duration is the sum of its pieces.
    pub fn new(fps: f64, pieces: Vec<Piece>) -> Self {
        let duration_s = pieces.iter().map(Piece::duration).sum();
        TrajectorySpec { fps, duration_s, pieces, noise_sigma_p: 0.0, seed: 0, smooth_window: 1 }
    }

    pub fn with_noise(mut self, sigma_p: f64, seed: u64, smooth_window: usize) -> Self {
        self.noise_sigma_p = sigma_p;
        self.seed = seed;
        self.smooth_window = smooth_window;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.fps > 0.0) {
            return Err(SynthError::Spec("fps must be positive"));
        }
        if !(self.noise_sigma_p >= 0.0) {
            return Err(SynthError::Spec("noise_sigma_p must be non-negative"));
        }
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return Err(SynthError::Spec("smooth_window must be odd and positive"));
        }
        for piece in &self.pieces {
            let ok = match *piece {
                Piece::HoldPiece { duration_s, wobble_p2p, .. } => duration_s > 0.0 && wobble_p2p >= 0.0,
                Piece::NodPiece { half_amp_p, cycles, cycle_s, .. } => half_amp_p > 0.0 && cycles >= 1 && cycle_s > 0.0,
                Piece::RampPiece { duration_s, .. } => duration_s > 0.0,
            };
            if !ok {
                return Err(SynthError::Spec("piece durations, amplitudes and cycles must be positive"));
            }
            let (lo, hi) = piece.p_range();
            if lo < -1.0 || hi > 1.0 {
                return Err(SynthError::Spec("piece leaves the [-1, 1] range"));
            }
        }
        let total: f64 = self.pieces.iter().map(Piece::duration).sum();
        if self.pieces.is_empty() || libm::fabs(total - self.duration_s) > TILE_TOLERANCE_S {
            return Err(SynthError::Tiling { pieces_s: total, duration_s: self.duration_s });
        }
        Ok(())
    }

    /// Piece start times, seconds.
    fn starts(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.pieces
            .iter()
            .map(|p| {
                let s = t;
                t += p.duration();
                s
            })
            .collect()
    }

    fn sample_count(&self) -> usize {
        libm::round(self.duration_s * self.fps) as usize
    }

    /// Noise-free position and derivative at time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let starts = self.starts();
        let k = starts.iter().rposition(|&s| s <= t + 1e-9).unwrap_or(0);
        self.pieces[k].eval(t - starts[k])
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid trajectory spec: {0}")]
    Spec(&'static str),
    #[error("pieces cover {pieces_s} s but the spec lasts {duration_s} s")]
    Tiling { pieces_s: f64, duration_s: f64 },
    #[error(transparent)]
    Calibration(#[from] crate::calibration::CalibrationError),
    #[error(transparent)]
    Kinematics(#[from] crate::kinematics::KinematicsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub events: Vec<MarkerEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub raw: AngleSeries,
    pub norm: NormalizedSeries,
    pub vel: VelocitySeries,
    pub truth: GroundTruth,
}

pub fn generate(spec: &TrajectorySpec, profile: &CalibrationProfile) -> Result<Generated, SynthError> {
    generate_with(spec, profile, &DetectorConfig::default())
}

/// Like [`generate`], with ground-truth thresholds taken from `cfg`.
pub fn generate_with(
    spec: &TrajectorySpec,
    profile: &CalibrationProfile,
    cfg: &DetectorConfig,
) -> Result<Generated, SynthError> {
    spec.validate()?;
    profile.validate()?;
    let n = spec.sample_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma_p).map_err(|_| SynthError::Spec("noise_sigma_p must be finite"))?;
    let samples: Vec<AngleSample> = (0..n)
        .map(|i| {
            let t = i as f64 / spec.fps;
            let (mut p, _) = spec.eval(t);
            if spec.noise_sigma_p > 0.0 {
                p += noise.sample(&mut rng);
            }
            AngleSample { t_s: t, theta_deg: profile.denormalize(p.clamp(-1.0, 1.0)), quality: Quality::Good }
        })
        .collect();
    let raw = AngleSeries {
        subject_id: profile.subject_id.clone(),
        segment: profile.segment,
        dof: profile.dof,
        fps: spec.fps,
        samples,
    };
    let smoothed = kinematics::smooth(&raw, spec.smooth_window)?;
    let vel = kinematics::velocity(&smoothed)?;
    let norm = normalize_series(&smoothed, profile)?;
    let truth = ground_truth(spec, profile, cfg);
    Ok(Generated { raw, norm, vel, truth })
}

/// Raw degrees/second of the noise-free signal at time `t`.
fn analytic_velocity(spec: &TrajectorySpec, profile: &CalibrationProfile, t: f64) -> f64 {
    let (p, dp) = spec.eval(t);
    dp * profile.slope_deg_per_p(p) * profile.orientation()
}

/// Largest analytic |velocity| over `[start, end)`, on a fine grid.
fn peak_speed(spec: &TrajectorySpec, profile: &CalibrationProfile, start: f64, end: f64) -> f64 {
    const STEPS: usize = 4000;
    (0..STEPS)
        .map(|k| start + (end - start) * k as f64 / STEPS as f64)
        .map(|t| libm::fabs(analytic_velocity(spec, profile, t)))
        .fold(0.0, f64::max)
}

/// Analytic velocity sampled on the spec's frame grid.
pub fn analytic_velocities(spec: &TrajectorySpec, profile: &CalibrationProfile) -> Vec<f64> {
    (0..spec.sample_count()).map(|i| analytic_velocity(spec, profile, i as f64 / spec.fps)).collect()
}

/// Events implied by the pieces: every hold piece of at least `hold_min_s`,
/// every nod piece, and one speed band over the whole span.
pub fn ground_truth(spec: &TrajectorySpec, profile: &CalibrationProfile, cfg: &DetectorConfig) -> GroundTruth {
    let mut events = Vec::new();
    let starts = spec.starts();
    let neutral = NOTCH_BOUNDARIES[0];
    for (piece, &start) in spec.pieces.iter().zip(&starts) {
        let end = start + piece.duration();
        match *piece {
            Piece::HoldPiece { p, duration_s, wobble_p2p } if duration_s + 1e-9 >= cfg.hold_min_s => {
                let notch = notch_of(p).unwrap_or(Notch::Neutral);
                let peak_wobble_speed = peak_speed(spec, profile, start, end);
                events.push(MarkerEvent {
                    kind: MarkerKind::Hold {
                        duration_s,
                        median_notch: notch,
                        non_neutral: notch != Notch::Neutral,
                        micro_oscillation: wobble_p2p > 0.0 && peak_wobble_speed >= cfg.hold_v_max,
                    },
                    start_s: start,
                    end_s: end,
                });
            }
            Piece::NodPiece { center_p, half_amp_p, cycles, .. } => {
                let (lo, hi) = (center_p - half_amp_p, center_p + half_amp_p);
                events.push(MarkerEvent {
                    kind: MarkerKind::NodBurst {
                        cycles,
                        crosses_neutral: lo < neutral && hi > -neutral,
                        max_peak_to_peak_p: 2.0 * half_amp_p,
                        peak_speed_deg_s: peak_speed(spec, profile, start, end),
                    },
                    start_s: start,
                    end_s: end,
                });
            }
            _ => {}
        }
    }

    // Speed statistic from the analytic derivative over moving samples
    // outside the planted holds.
    let holds: Vec<(f64, f64)> = events.iter().filter(|e| e.family() == Family::Hold).map(|e| (e.start_s, e.end_s)).collect();
    let half_frame = 0.5 / spec.fps;
    let moving: Vec<f64> = (0..spec.sample_count())
        .map(|i| i as f64 / spec.fps)
        .filter(|&t| !holds.iter().any(|&(s, e)| t + half_frame >= s && t + half_frame < e))
        .map(|t| libm::fabs(analytic_velocity(spec, profile, t)))
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
    events.push(MarkerEvent {
        kind: MarkerKind::SpeedBand { band, stat_deg_s: stat },
        start_s: 0.0,
        end_s: spec.sample_count() as f64 / spec.fps,
    });
    crate::markers::sort_events(&mut events);
    GroundTruth { events }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KindScore {
    pub matched: usize,
    pub detected: usize,
    pub planted: usize,
}

impl KindScore {
    /// 1.0 when nothing was detected (no false positives).
    pub fn precision(&self) -> f64 {
        if self.detected == 0 {
            1.0
        } else {
            self.matched as f64 / self.detected as f64
        }
    }

    /// 1.0 when nothing was planted.
    pub fn recall(&self) -> f64 {
        if self.planted == 0 {
            1.0
        } else {
            self.matched as f64 / self.planted as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn add(&mut self, other: &KindScore) {
        self.matched += other.matched;
        self.detected += other.detected;
        self.planted += other.planted;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Evaluation {
    pub hold: KindScore,
    pub nod: KindScore,
    pub speed: KindScore,
}

impl Evaluation {
    pub fn get(&self, family: Family) -> &KindScore {
        match family {
            Family::Hold => &self.hold,
            Family::NodBurst => &self.nod,
            Family::SpeedBand => &self.speed,
        }
    }

    fn get_mut(&mut self, family: Family) -> &mut KindScore {
        match family {
            Family::Hold => &mut self.hold,
            Family::NodBurst => &mut self.nod,
            Family::SpeedBand => &mut self.speed,
        }
    }

    pub fn add(&mut self, other: &Evaluation) {
        for f in Family::ALL {
            self.get_mut(f).add(other.get(f));
        }
    }
}

fn same_kind(a: &MarkerEvent, b: &MarkerEvent) -> bool {
    match (a.kind, b.kind) {
        (MarkerKind::SpeedBand { band: x, .. }, MarkerKind::SpeedBand { band: y, .. }) => x == y,
        _ => a.family() == b.family(),
    }
}

/// One-to-one greedy matching by descending IoU; speed bands must also agree
/// on the band.
pub fn evaluate(detected: &[MarkerEvent], truth: &GroundTruth, iou_min: f64) -> Evaluation {
    let mut eval = Evaluation::default();
    for family in Family::ALL {
        let det: Vec<&MarkerEvent> = detected.iter().filter(|e| e.family() == family).collect();
        let tru: Vec<&MarkerEvent> = truth.events.iter().filter(|e| e.family() == family).collect();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, d) in det.iter().enumerate() {
            for (j, t) in tru.iter().enumerate() {
                let iou = d.iou(t);
                if same_kind(d, t) && iou >= iou_min {
                    pairs.push((iou, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_d = alloc::vec![false; det.len()];
        let mut used_t = alloc::vec![false; tru.len()];
        let mut matched = 0;
        for (_, i, j) in pairs {
            if !used_d[i] && !used_t[j] {
                used_d[i] = true;
                used_t[j] = true;
                matched += 1;
            }
        }
        *eval.get_mut(family) = KindScore { matched, detected: det.len(), planted: tru.len() };
    }
    eval
}

/// The reference French-speaker neck profile used by the bundled fixtures.
pub fn reference_profile() -> CalibrationProfile {
    CalibrationProfile::neck("synthetic", 104.0, 140.0, 88.0).unwrap_or_else(|_| unreachable!())
}

fn hold(p: f64, duration_s: f64) -> Piece {
    Piece::HoldPiece { p, duration_s, wobble_p2p: 0.0 }
}

fn wobble(p: f64, duration_s: f64, wobble_p2p: f64) -> Piece {
    Piece::HoldPiece { p, duration_s, wobble_p2p }
}

fn nod(center_p: f64, half_amp_p: f64, cycles: u32, cycle_s: f64) -> Piece {
    Piece::NodPiece { center_p, half_amp_p, cycles, cycle_s }
}

fn ramp(p_from: f64, p_to: f64, duration_s: f64) -> Piece {
    Piece::RampPiece { p_from, p_to, duration_s }
}

/// Bundled noise-free fixtures covering holds, nods, ramps and micro-oscillations.
pub fn fixture_suite() -> Vec<(String, TrajectorySpec)> {
    let fps = 25.0;
    let named = |name: &str, pieces: Vec<Piece>| (String::from(name), TrajectorySpec::new(fps, pieces));
    alloc::vec![
        named("hold-flx-moyen-2.5s", alloc::vec![hold(0.5, 2.5)]),
        named("hold-1.9s-below-threshold", alloc::vec![hold(0.5, 1.9)]),
        named("hold-neutral-3s", alloc::vec![hold(0.0, 3.0)]),
        named("hold-ext-grand", alloc::vec![hold(-0.7, 2.4)]),
        named("hold-micro-oscillation", alloc::vec![wobble(0.0, 3.0, 0.05)]),
        named("hold-micro-flexed", alloc::vec![wobble(0.4, 2.6, 0.05)]),
        named("ramp-only", alloc::vec![ramp(-0.8, 0.8, 2.0)]),
        named("ramp-between-holds", alloc::vec![hold(0.0, 2.4), ramp(0.0, 0.6, 1.0), hold(0.6, 2.4)]),
        named("short-holds-between-ramps", alloc::vec![ramp(0.0, 0.6, 1.0), hold(0.6, 1.2), ramp(0.6, -0.4, 1.0), hold(-0.4, 1.5)]),
        named("nod-4-small-flexed", alloc::vec![nod(0.2, 0.06, 4, 0.6)]),
        named("nod-2-crossing", alloc::vec![nod(0.05, 0.25, 2, 0.6)]),
        named("nod-confined-flexed", alloc::vec![nod(0.3, 0.15, 3, 0.6)]),
        named("nod-single-cycle", alloc::vec![hold(0.0, 1.0), nod(0.0, 0.3, 1, 0.8), hold(0.0, 1.0)]),
        named("nod-after-hold", alloc::vec![hold(0.1, 2.5), nod(0.1, 0.2, 3, 0.5)]),
        named("hold-nod-hold", alloc::vec![hold(0.3, 2.4), nod(0.3, 0.2, 2, 0.7), hold(0.3, 2.4)]),
        named("two-bursts", alloc::vec![nod(0.0, 0.3, 2, 0.6), hold(0.0, 1.5), nod(0.0, 0.2, 3, 0.5)]),
        named(
            "neutral-ext-flex-nods",
            alloc::vec![
                hold(0.0, 3.0),
                ramp(0.0, -0.8, 1.0),
                ramp(-0.8, 0.2, 1.0),
                nod(0.2, 0.06, 4, 0.6),
                ramp(0.2, 0.9, 1.0),
                hold(0.9, 2.5),
            ],
        ),
        named("ramp-down-into-nod", alloc::vec![hold(0.6, 1.0), ramp(0.6, 0.0, 1.0), nod(0.0, 0.25, 3, 0.6), hold(0.0, 1.0)]),
        named("wobble-then-nods", alloc::vec![wobble(-0.3, 2.5, 0.04), ramp(-0.3, 0.1, 1.0), nod(0.1, 0.3, 2, 0.6), ramp(0.1, 0.6, 1.0), hold(0.6, 2.5)]),
        named("fast-nods-high-speed", alloc::vec![nod(0.3, 0.159_154_943_091_895_36, 5, 0.6)]),
        named("slow-nods-low-speed", alloc::vec![nod(0.3, 0.035_367_765_131_532_3, 4, 0.8)]),
        named("ext-side-nods", alloc::vec![hold(-0.5, 2.5), nod(-0.5, 0.2, 3, 0.6), hold(-0.5, 2.5)]),
        named(
            "uncertainty-pattern",
            alloc::vec![ramp(0.0, -0.6, 1.0), wobble(-0.6, 3.5, 0.03), ramp(-0.6, 0.0, 1.5), hold(0.0, 1.0)],
        ),
        named("long-mixed", alloc::vec![
            hold(0.0, 2.5),
            nod(0.0, 0.2, 4, 0.5),
            ramp(0.0, 0.7, 1.0),
            hold(0.7, 3.0),
            ramp(0.7, -0.2, 1.2),
            nod(-0.2, 0.1, 3, 0.6),
            ramp(-0.2, -0.8, 0.8),
            hold(-0.8, 2.5),
        ]),
    ]
}

/// The fixture suite with Gaussian noise of `sigma_p` and a 5-frame smoother.
pub fn noisy_suite(sigma_p: f64) -> Vec<(String, TrajectorySpec)> {
    fixture_suite()
        .into_iter()
        .enumerate()
        .map(|(i, (name, spec))| (name, spec.with_noise(sigma_p, 1000 + i as u64, 5)))
        .collect()
}
