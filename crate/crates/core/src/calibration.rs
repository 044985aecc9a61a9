//! Per-subject calibration of raw angles onto a signed normalized scale and
//! its discretization into notches.
//!
//! A profile anchors three raw angles: the rest position and the two
//! articular limits. Normalization is piecewise linear on either side of rest,
//! so `rest -> 0`, `flexion limit -> +1`, `extension limit -> -1`, whichever
//! way the raw convention runs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dof::{DofId, SegmentId};
use crate::kinematics::{AngleSeries, Quality};
use crate::stats::median;

/// Half-width of the window used to read a landmark's angle.
pub const LANDMARK_WINDOW_S: f64 = 0.2;

/// Upper bounds of the NEUTRAL, PETIT, MOYEN and GRAND bands in `|p|`.
pub const NOTCH_BOUNDARIES: [f64; 4] = [0.125, 0.375, 0.625, 0.875];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("rest angle {rest} is not strictly between the limits {ext} and {flx}")]
    Order { rest: f64, flx: f64, ext: f64 },
    #[error("landmark {label} at {t_s} s lies outside the series")]
    LandmarkRange { label: &'static str, t_s: f64 },
    #[error("normalized value {0} is outside [-1, 1]")]
    OutOfRange(f64),
    #[error("profile is for {profile} but series is {series}")]
    Mismatch { profile: String, series: String },
}

/// The nine notches, ordered from the extension limit to the flexion limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Notch {
    ExtButee,
    ExtGrand,
    ExtMoyen,
    ExtPetit,
    Neutral,
    FlxPetit,
    FlxMoyen,
    FlxGrand,
    FlxButee,
}

/// Notch grade away from rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grade {
    Petit,
    Moyen,
    Grand,
    Butee,
}

impl Grade {
    pub const ALL: [Grade; 4] = [Grade::Petit, Grade::Moyen, Grade::Grand, Grade::Butee];

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::Petit => "PETIT",
            Grade::Moyen => "MOYEN",
            Grade::Grand => "GRAND",
            Grade::Butee => "BUTEE",
        }
    }
}

impl Notch {
    pub const ALL: [Notch; 9] = [
        Notch::ExtButee,
        Notch::ExtGrand,
        Notch::ExtMoyen,
        Notch::ExtPetit,
        Notch::Neutral,
        Notch::FlxPetit,
        Notch::FlxMoyen,
        Notch::FlxGrand,
        Notch::FlxButee,
    ];

    /// Signed position in the order, `-4..=4`, zero at NEUTRAL.
    pub fn rank(self) -> i32 {
        self as i32 - 4
    }

    pub fn from_rank(rank: i32) -> Option<Notch> {
        usize::try_from(rank + 4).ok().and_then(|i| Notch::ALL.get(i).copied())
    }

    /// `None` for NEUTRAL; otherwise the side (`true` = positive/flexion) and grade.
    pub fn split(self) -> Option<(bool, Grade)> {
        let r = self.rank();
        if r == 0 {
            None
        } else {
            Some((r > 0, Grade::ALL[(r.unsigned_abs() - 1) as usize]))
        }
    }

    pub fn from_split(positive: bool, grade: Grade) -> Notch {
        let magnitude = grade as i32 + 1;
        Notch::from_rank(if positive { magnitude } else { -magnitude }).unwrap_or(Notch::Neutral)
    }

    /// The `p` interval covered by this notch.
    pub fn interval(self) -> (f64, f64) {
        let r = self.rank();
        let edges = [0.0, NOTCH_BOUNDARIES[0], NOTCH_BOUNDARIES[1], NOTCH_BOUNDARIES[2], NOTCH_BOUNDARIES[3], 1.0];
        match r {
            0 => (-NOTCH_BOUNDARIES[0], NOTCH_BOUNDARIES[0]),
            r if r > 0 => (edges[r as usize], edges[r as usize + 1]),
            r => (-edges[(-r) as usize + 1], -edges[(-r) as usize]),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Notch::ExtButee => "EXT_BUTEE",
            Notch::ExtGrand => "EXT_GRAND",
            Notch::ExtMoyen => "EXT_MOYEN",
            Notch::ExtPetit => "EXT_PETIT",
            Notch::Neutral => "NEUTRAL",
            Notch::FlxPetit => "FLX_PETIT",
            Notch::FlxMoyen => "FLX_MOYEN",
            Notch::FlxGrand => "FLX_GRAND",
            Notch::FlxButee => "FLX_BUTEE",
        }
    }
}

impl fmt::Display for Notch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Notch {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Notch::ALL.into_iter().find(|n| n.as_str() == s).ok_or(())
    }
}

/// Maps `p` in `[-1, 1]` to its notch. A value on a boundary takes the notch
/// farther from rest.
pub fn notch_of(p: f64) -> Result<Notch, CalibrationError> {
    if !(-1.0..=1.0).contains(&p) {
        return Err(CalibrationError::OutOfRange(p));
    }
    let magnitude = NOTCH_BOUNDARIES.iter().filter(|&&b| libm::fabs(p) >= b).count() as i32;
    let rank = if p < 0.0 { -magnitude } else { magnitude };
    Ok(Notch::from_rank(rank).unwrap_or(Notch::Neutral))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub subject_id: String,
    pub segment: SegmentId,
    pub dof: DofId,
    pub rest_deg: f64,
    pub flx_limit_deg: f64,
    pub ext_limit_deg: f64,
}

impl CalibrationProfile {
    pub fn new(
        subject_id: impl Into<String>,
        segment: SegmentId,
        dof: DofId,
        rest_deg: f64,
        flx_limit_deg: f64,
        ext_limit_deg: f64,
    ) -> Result<Self, CalibrationError> {
        let profile = CalibrationProfile {
            subject_id: subject_id.into(),
            segment,
            dof,
            rest_deg,
            flx_limit_deg,
            ext_limit_deg,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Neck FLXEXT profile.
    pub fn neck(subject_id: impl Into<String>, rest: f64, flx: f64, ext: f64) -> Result<Self, CalibrationError> {
        CalibrationProfile::new(subject_id, SegmentId::Cou, DofId::FLXEXT, rest, flx, ext)
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let (rest, flx, ext) = (self.rest_deg, self.flx_limit_deg, self.ext_limit_deg);
        let between = (ext < rest && rest < flx) || (flx < rest && rest < ext);
        if !between || !rest.is_finite() || !flx.is_finite() || !ext.is_finite() {
            return Err(CalibrationError::Order { rest, flx, ext });
        }
        Ok(())
    }

    /// `+1` when flexion increases the raw angle, `-1` when it decreases it.
    pub fn orientation(&self) -> f64 {
        if self.flx_limit_deg > self.rest_deg {
            1.0
        } else {
            -1.0
        }
    }

    pub fn normalize(&self, theta_deg: f64) -> f64 {
        let offset = theta_deg - self.rest_deg;
        let p = if offset * self.orientation() >= 0.0 {
            offset / (self.flx_limit_deg - self.rest_deg)
        } else {
            -offset / (self.ext_limit_deg - self.rest_deg)
        };
        p.clamp(-1.0, 1.0)
    }

    /// Inverse of [`normalize`](Self::normalize) on `[-1, 1]`.
    pub fn denormalize(&self, p: f64) -> f64 {
        if p >= 0.0 {
            self.rest_deg + p * (self.flx_limit_deg - self.rest_deg)
        } else {
            self.rest_deg - p * (self.ext_limit_deg - self.rest_deg)
        }
    }

    /// Raw degrees per unit of `p` on the side of rest that `p` falls on.
    pub fn slope_deg_per_p(&self, p: f64) -> f64 {
        if p >= 0.0 {
            libm::fabs(self.flx_limit_deg - self.rest_deg)
        } else {
            libm::fabs(self.ext_limit_deg - self.rest_deg)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LandmarkLabel {
    Rest,
    FlxLimit,
    ExtLimit,
}

impl LandmarkLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            LandmarkLabel::Rest => "REST",
            LandmarkLabel::FlxLimit => "FLX_LIMIT",
            LandmarkLabel::ExtLimit => "EXT_LIMIT",
        }
    }
}

/// Timestamps of the three calibration landmarks, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmarks {
    pub rest_s: f64,
    pub flx_limit_s: f64,
    pub ext_limit_s: f64,
}

fn landmark_angle(series: &AngleSeries, label: LandmarkLabel, t_s: f64) -> Result<f64, CalibrationError> {
    let (start, end) = series.span();
    if series.is_empty() || t_s < start || t_s > end {
        return Err(CalibrationError::LandmarkRange { label: label.as_str(), t_s });
    }
    let window: Vec<f64> = series
        .samples
        .iter()
        .filter(|s| libm::fabs(s.t_s - t_s) <= LANDMARK_WINDOW_S + 1e-9)
        .map(|s| s.theta_deg)
        .collect();
    let nearest = || {
        series
            .samples
            .iter()
            .min_by(|a, b| libm::fabs(a.t_s - t_s).total_cmp(&libm::fabs(b.t_s - t_s)))
            .map(|s| s.theta_deg)
    };
    median(&window).or_else(nearest).ok_or(CalibrationError::LandmarkRange { label: label.as_str(), t_s })
}

/// Reads rest and limit angles as the median raw angle within
/// ±[`LANDMARK_WINDOW_S`] of each landmark.
pub fn build_profile(series: &AngleSeries, landmarks: &Landmarks) -> Result<CalibrationProfile, CalibrationError> {
    let rest = landmark_angle(series, LandmarkLabel::Rest, landmarks.rest_s)?;
    let flx = landmark_angle(series, LandmarkLabel::FlxLimit, landmarks.flx_limit_s)?;
    let ext = landmark_angle(series, LandmarkLabel::ExtLimit, landmarks.ext_limit_s)?;
    CalibrationProfile::new(series.subject_id.clone(), series.segment, series.dof, rest, flx, ext)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSample {
    pub t_s: f64,
    pub p: f64,
    pub notch: Notch,
    pub quality: Quality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSeries {
    pub subject_id: String,
    pub segment: SegmentId,
    pub dof: DofId,
    pub fps: f64,
    pub samples: Vec<NormalizedSample>,
}

impl NormalizedSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (a.t_s, b.t_s + 1.0 / self.fps),
            _ => (0.0, 0.0),
        }
    }
}

pub fn normalize_series(series: &AngleSeries, profile: &CalibrationProfile) -> Result<NormalizedSeries, CalibrationError> {
    if profile.segment != series.segment || profile.dof != series.dof {
        return Err(CalibrationError::Mismatch {
            profile: alloc::format!("{}:{}", profile.segment, profile.dof),
            series: alloc::format!("{}:{}", series.segment, series.dof),
        });
    }
    profile.validate()?;
    let samples = series
        .samples
        .iter()
        .map(|s| {
            let p = profile.normalize(s.theta_deg);
            let notch = notch_of(p)?;
            Ok(NormalizedSample { t_s: s.t_s, p, notch, quality: s.quality })
        })
        .collect::<Result<Vec<_>, CalibrationError>>()?;
    Ok(NormalizedSeries {
        subject_id: series.subject_id.clone(),
        segment: series.segment,
        dof: series.dof,
        fps: series.fps,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::AngleSample;
    use alloc::vec;
    use proptest::prelude::*;

    fn french() -> CalibrationProfile {
        CalibrationProfile::neck("fr", 104.0, 140.0, 88.0).unwrap()
    }

    fn lsf() -> CalibrationProfile {
        CalibrationProfile::neck("lsf", 97.0, 137.0, 53.0).unwrap()
    }

    fn series(values: &[f64]) -> AngleSeries {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| AngleSample { t_s: i as f64 / 25.0, theta_deg: v, quality: Quality::Good })
            .collect();
        AngleSeries::neck("fr", 25.0, samples)
    }

    #[test]
    fn normalize_reference_values() {
        assert_eq!(french().normalize(104.0), 0.0);
        assert!((french().normalize(114.0) - 10.0 / 36.0).abs() < 1e-12);
        assert_eq!(french().normalize(94.0), -0.625);
        assert!((lsf().normalize(60.0) - (-37.0 / 44.0)).abs() < 1e-12);
        assert!((lsf().normalize(99.5) - 0.0625).abs() < 1e-12);
        assert_eq!(french().normalize(500.0), 1.0);
        assert_eq!(french().normalize(-500.0), -1.0);
    }

    #[test]
    fn notch_lookup() {
        assert_eq!(notch_of(0.0), Ok(Notch::Neutral));
        assert_eq!(notch_of(10.0 / 36.0), Ok(Notch::FlxPetit));
        assert_eq!(notch_of(-0.625), Ok(Notch::ExtGrand));
        assert_eq!(notch_of(0.0625), Ok(Notch::Neutral));
        assert_eq!(notch_of(0.125), Ok(Notch::FlxPetit));
        assert_eq!(notch_of(-0.875), Ok(Notch::ExtButee));
        assert_eq!(notch_of(1.0), Ok(Notch::FlxButee));
        assert_eq!(notch_of(1.5), Err(CalibrationError::OutOfRange(1.5)));
    }

    #[test]
    fn profile_order_rules() {
        let inverted = CalibrationProfile::neck("x", 104.0, 88.0, 140.0).unwrap();
        assert_eq!(inverted.orientation(), -1.0);
        assert_eq!(inverted.normalize(88.0), 1.0);
        assert_eq!(inverted.normalize(140.0), -1.0);
        assert!(matches!(CalibrationProfile::neck("x", 150.0, 140.0, 88.0), Err(CalibrationError::Order { .. })));
        assert!(matches!(CalibrationProfile::neck("x", 104.0, 104.0, 88.0), Err(CalibrationError::Order { .. })));
    }

    #[test]
    fn build_profile_uses_median_window() {
        // 0–1 s at 104 with a one-frame spike, 1–2 s at 140, 2–3 s at 88.
        let mut values = vec![104.0; 25];
        values[12] = 130.0;
        values.extend(vec![140.0; 25]);
        values.extend(vec![88.0; 25]);
        let s = series(&values);
        let lm = Landmarks { rest_s: 0.48, flx_limit_s: 1.5, ext_limit_s: 2.5 };
        let p = build_profile(&s, &lm).unwrap();
        assert_eq!((p.rest_deg, p.flx_limit_deg, p.ext_limit_deg), (104.0, 140.0, 88.0));

        let bad = Landmarks { rest_s: 0.5, flx_limit_s: 1.5, ext_limit_s: 9.0 };
        assert!(matches!(build_profile(&s, &bad), Err(CalibrationError::LandmarkRange { label: "EXT_LIMIT", .. })));
        let swapped = Landmarks { rest_s: 1.5, flx_limit_s: 0.5, ext_limit_s: 2.5 };
        assert!(matches!(build_profile(&s, &swapped), Err(CalibrationError::Order { .. })));
    }

    #[test]
    fn normalize_series_values_and_mismatch() {
        let n = normalize_series(&series(&[114.0, 104.0, 94.0]), &french()).unwrap();
        let ps: Vec<f64> = n.samples.iter().map(|s| s.p).collect();
        assert!((ps[0] - 0.277_777_777_8).abs() < 1e-9);
        assert_eq!(&ps[1..], &[0.0, -0.625]);
        let rest = normalize_series(&series(&[104.0; 5]), &french()).unwrap();
        assert!(rest.samples.iter().all(|s| s.p == 0.0 && s.notch == Notch::Neutral));
        let mut tete = french();
        tete.segment = SegmentId::Tete;
        assert!(matches!(normalize_series(&series(&[104.0]), &tete), Err(CalibrationError::Mismatch { .. })));
    }

    #[test]
    fn notch_midpoints_round_trip() {
        for notch in Notch::ALL {
            let (lo, hi) = notch.interval();
            assert_eq!(notch_of((lo + hi) / 2.0), Ok(notch));
            if let Some((pos, grade)) = notch.split() {
                assert_eq!(Notch::from_split(pos, grade), notch);
            }
        }
    }

    fn arb_profile() -> impl Strategy<Value = CalibrationProfile> {
        (50.0f64..150.0, 1.0f64..60.0, 1.0f64..60.0, any::<bool>()).prop_map(|(rest, up, down, flip)| {
            let (flx, ext) = if flip { (rest - up, rest + down) } else { (rest + up, rest - down) };
            CalibrationProfile::neck("s", rest, flx, ext).unwrap()
        })
    }

    proptest! {
        #[test]
        fn anchors_map_exactly(profile in arb_profile()) {
            prop_assert_eq!(profile.normalize(profile.rest_deg), 0.0);
            prop_assert_eq!(profile.normalize(profile.flx_limit_deg), 1.0);
            prop_assert_eq!(profile.normalize(profile.ext_limit_deg), -1.0);
        }

        #[test]
        fn normalize_monotone_toward_flexion(profile in arb_profile(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            // Walk from the extension limit to the flexion limit.
            let lerp = |w: f64| profile.ext_limit_deg + w * (profile.flx_limit_deg - profile.ext_limit_deg);
            prop_assume!((a - b).abs() > 1e-9);
            let (pa, pb) = (profile.normalize(lerp(a)), profile.normalize(lerp(b)));
            prop_assert_eq!(a < b, pa < pb);
            prop_assert!(notch_of(pa).unwrap() <= notch_of(pb).unwrap() || a > b);
        }

        #[test]
        fn profiles_agree_on_anchors(a in arb_profile(), b in arb_profile()) {
            for (ta, tb) in [(a.rest_deg, b.rest_deg), (a.flx_limit_deg, b.flx_limit_deg), (a.ext_limit_deg, b.ext_limit_deg)] {
                prop_assert_eq!(a.normalize(ta), b.normalize(tb));
            }
        }

        #[test]
        fn notch_of_is_monotone(a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
            if a <= b {
                prop_assert!(notch_of(a).unwrap() <= notch_of(b).unwrap());
            }
        }

        #[test]
        fn denormalize_inverts(profile in arb_profile(), p in -1.0f64..=1.0) {
            prop_assert!((profile.normalize(profile.denormalize(p)) - p).abs() < 1e-9);
        }
    }
}
