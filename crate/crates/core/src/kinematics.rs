//! Neck FLXEXT angle estimation, smoothing and differentiation.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dof::{DofId, SegmentId};
use crate::pose::{Keypoint, KeypointFrame, KeypointSchema, PoseTrack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Quality {
    Good,
    LowConfidence,
    Interpolated,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Good => "GOOD",
            Quality::LowConfidence => "LOW_CONFIDENCE",
            Quality::Interpolated => "INTERPOLATED",
        }
    }
}

impl core::str::FromStr for Quality {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "GOOD" => Ok(Quality::Good),
            "LOW_CONFIDENCE" => Ok(Quality::LowConfidence),
            "INTERPOLATED" => Ok(Quality::Interpolated),
            _ => Err(()),
        }
    }
}

/// How the raw neck angle is read off the 2D skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Estimator {
    /// `100 * (y_neck - y_head) / shoulder_width`; suited to frontal video.
    #[default]
    SagittalProxy,
    /// Angle at the neck between the head and the hip midpoint; suited to profile video.
    InteriorAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSample {
    pub t_s: f64,
    pub theta_deg: f64,
    pub quality: Quality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSeries {
    pub subject_id: String,
    pub segment: SegmentId,
    pub dof: DofId,
    pub fps: f64,
    pub samples: Vec<AngleSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySample {
    pub t_s: f64,
    pub v_deg_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocitySeries {
    pub subject_id: String,
    pub segment: SegmentId,
    pub dof: DofId,
    pub fps: f64,
    pub samples: Vec<VelocitySample>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("required keypoint `{0}` is missing")]
    MissingKeypoint(&'static str),
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("series has no GOOD sample")]
    EmptySeries,
    #[error("smoothing window must be odd and positive, got {0}")]
    Window(usize),
    #[error("velocity needs at least 2 samples, got {0}")]
    TooShort(usize),
}

impl AngleSeries {
    /// Neck FLXEXT series with the given samples.
    pub fn neck(subject_id: impl Into<String>, fps: f64, samples: Vec<AngleSample>) -> Self {
        AngleSeries { subject_id: subject_id.into(), segment: SegmentId::Cou, dof: DofId::FLXEXT, fps, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn thetas(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.theta_deg)
    }

    /// Time covered by the series, each sample owning one `1/fps` slot.
    pub fn span(&self) -> (f64, f64) {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (a.t_s, b.t_s + 1.0 / self.fps),
            _ => (0.0, 0.0),
        }
    }
}

impl VelocitySeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn required(frame: &KeypointFrame, schema: KeypointSchema, role: Keypoint) -> Result<(f64, f64, f64), KinematicsError> {
    match frame.point(schema, role) {
        Some(p) if !p.is_missing() => Ok((p.x, p.y, p.confidence)),
        _ => Err(KinematicsError::MissingKeypoint(role.name())),
    }
}

fn midpoint(a: (f64, f64, f64), b: (f64, f64, f64)) -> (f64, f64, f64) {
    ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0, a.2.min(b.2))
}

/// Neck point: the HALPE26 neck keypoint, or the shoulder midpoint.
fn neck_point(frame: &KeypointFrame, schema: KeypointSchema) -> Result<(f64, f64, f64), KinematicsError> {
    match schema {
        KeypointSchema::Halpe26 => required(frame, schema, Keypoint::Neck),
        KeypointSchema::Coco17 => Ok(midpoint(
            required(frame, schema, Keypoint::LeftShoulder)?,
            required(frame, schema, Keypoint::RightShoulder)?,
        )),
    }
}

fn hip_point(frame: &KeypointFrame, schema: KeypointSchema) -> Result<(f64, f64, f64), KinematicsError> {
    match schema {
        KeypointSchema::Halpe26 => required(frame, schema, Keypoint::MidHip),
        KeypointSchema::Coco17 => Ok(midpoint(
            required(frame, schema, Keypoint::LeftHip)?,
            required(frame, schema, Keypoint::RightHip)?,
        )),
    }
}

/// Raw FLXEXT angle of the neck on one frame, using the nose as head point.
pub fn neck_flxext_angle(
    frame: &KeypointFrame,
    schema: KeypointSchema,
    estimator: Estimator,
) -> Result<AngleSample, KinematicsError> {
    neck_flxext_angle_with(frame, schema, estimator, Keypoint::Nose)
}

pub fn neck_flxext_angle_with(
    frame: &KeypointFrame,
    schema: KeypointSchema,
    estimator: Estimator,
    head_point: Keypoint,
) -> Result<AngleSample, KinematicsError> {
    let head = required(frame, schema, head_point)?;
    let neck = neck_point(frame, schema)?;
    let (theta, min_conf) = match estimator {
        Estimator::SagittalProxy => {
            let l = required(frame, schema, Keypoint::LeftShoulder)?;
            let r = required(frame, schema, Keypoint::RightShoulder)?;
            let width = libm::hypot(l.0 - r.0, l.1 - r.1);
            if !(width > 0.0) {
                return Err(KinematicsError::Degenerate("zero shoulder width"));
            }
            // Image y grows downward: a head above the neck gives a positive rise.
            let rise = neck.1 - head.1;
            (100.0 * rise / width, head.2.min(neck.2).min(l.2).min(r.2))
        }
        Estimator::InteriorAngle => {
            let hip = hip_point(frame, schema)?;
            let (ux, uy) = (head.0 - neck.0, head.1 - neck.1);
            let (wx, wy) = (hip.0 - neck.0, hip.1 - neck.1);
            if (ux == 0.0 && uy == 0.0) || (wx == 0.0 && wy == 0.0) {
                return Err(KinematicsError::Degenerate("head or hip coincides with neck"));
            }
            let cross = ux * wy - uy * wx;
            let dot = ux * wx + uy * wy;
            (libm::atan2(libm::fabs(cross), dot).to_degrees(), head.2.min(neck.2).min(hip.2))
        }
    };
    let quality = if min_conf < crate::pose::LOW_CONFIDENCE { Quality::LowConfidence } else { Quality::Good };
    Ok(AngleSample { t_s: frame.timestamp_s, theta_deg: theta, quality })
}

/// One angle sample per frame index from the track's first frame to its last.
/// Frames where estimation fails, and indices absent from the track, hold the
/// previous value (the next good one at the start) and are flagged
/// LOW_CONFIDENCE rather than aborting the series.
pub fn angle_series(
    track: &PoseTrack,
    estimator: Estimator,
    subject_id: impl Into<String>,
) -> Result<AngleSeries, KinematicsError> {
    let estimates: Vec<Option<AngleSample>> =
        track.frames.iter().map(|f| neck_flxext_angle(f, track.schema, estimator).ok()).collect();
    let good = estimates.iter().flatten().filter(|s| s.quality == Quality::Good).count();
    if good == 0 {
        return Err(KinematicsError::EmptySeries);
    }
    let first_value = estimates.iter().flatten().map(|s| s.theta_deg).next().unwrap_or(0.0);
    let mut held = first_value;
    let mut samples = Vec::with_capacity(track.frames.len());
    let mut next_index = track.frames[0].frame_index;
    for (frame, estimate) in track.frames.iter().zip(estimates) {
        while next_index < frame.frame_index {
            samples.push(AngleSample { t_s: next_index as f64 / track.fps, theta_deg: held, quality: Quality::LowConfidence });
            next_index += 1;
        }
        let (theta, quality) = match estimate {
            Some(s) => (s.theta_deg, s.quality),
            None => (held, Quality::LowConfidence),
        };
        held = theta;
        let quality = if frame.interpolated && quality == Quality::Good { Quality::Interpolated } else { quality };
        samples.push(AngleSample { t_s: frame.timestamp_s, theta_deg: theta, quality });
        next_index = frame.frame_index + 1;
    }
    Ok(AngleSeries::neck(subject_id, track.fps, samples))
}

/// Centered moving average; near the ends the window shrinks to what is available.
pub fn smooth(series: &AngleSeries, window_frames: usize) -> Result<AngleSeries, KinematicsError> {
    if window_frames == 0 || window_frames.is_multiple_of(2) {
        return Err(KinematicsError::Window(window_frames));
    }
    let half = window_frames / 2;
    let values: Vec<f64> = series.thetas().collect();
    let n = values.len();
    let samples = series
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let window = &values[lo..=hi];
            // A flat window is returned as is so rounding cannot perturb it.
            let theta_deg = if window.iter().all(|&v| v == window[0]) {
                window[0]
            } else {
                window.iter().sum::<f64>() / window.len() as f64
            };
            AngleSample { theta_deg, ..*s }
        })
        .collect();
    Ok(AngleSeries { samples, ..series.clone() })
}

/// Central differences inside, one-sided differences at both ends, in degrees/second.
pub fn velocity(series: &AngleSeries) -> Result<VelocitySeries, KinematicsError> {
    let n = series.len();
    if n < 2 {
        return Err(KinematicsError::TooShort(n));
    }
    let theta: Vec<f64> = series.thetas().collect();
    let fps = series.fps;
    let samples = (0..n)
        .map(|i| {
            let v = if i == 0 {
                (theta[1] - theta[0]) * fps
            } else if i == n - 1 {
                (theta[n - 1] - theta[n - 2]) * fps
            } else {
                (theta[i + 1] - theta[i - 1]) * fps / 2.0
            };
            VelocitySample { t_s: series.samples[i].t_s, v_deg_s: v }
        })
        .collect();
    Ok(VelocitySeries {
        subject_id: series.subject_id.clone(),
        segment: series.segment,
        dof: series.dof,
        fps,
        samples,
    })
}
