//! Per-person keypoint tracks and the clean-up steps applied before kinematics.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Confidence under which a keypoint is kept but treated as unreliable.
pub const LOW_CONFIDENCE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum KeypointSchema {
    Coco17,
    Halpe26,
}

/// Keypoint roles the estimators use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keypoint {
    Nose,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftHip,
    RightHip,
    /// HALPE26 only.
    Head,
    /// HALPE26 only.
    Neck,
    /// HALPE26 only.
    MidHip,
}

impl Keypoint {
    pub fn name(self) -> &'static str {
        match self {
            Keypoint::Nose => "nose",
            Keypoint::LeftEar => "left_ear",
            Keypoint::RightEar => "right_ear",
            Keypoint::LeftShoulder => "left_shoulder",
            Keypoint::RightShoulder => "right_shoulder",
            Keypoint::LeftHip => "left_hip",
            Keypoint::RightHip => "right_hip",
            Keypoint::Head => "head",
            Keypoint::Neck => "neck",
            Keypoint::MidHip => "mid_hip",
        }
    }
}

impl KeypointSchema {
    pub fn keypoint_count(self) -> usize {
        match self {
            KeypointSchema::Coco17 => 17,
            KeypointSchema::Halpe26 => 26,
        }
    }

    pub fn from_keypoint_count(count: usize) -> Option<Self> {
        match count {
            17 => Some(KeypointSchema::Coco17),
            26 => Some(KeypointSchema::Halpe26),
            _ => None,
        }
    }

    /// Index of `role` in this schema's keypoint layout.
    pub fn index(self, role: Keypoint) -> Option<usize> {
        let common = match role {
            Keypoint::Nose => Some(0),
            Keypoint::LeftEar => Some(3),
            Keypoint::RightEar => Some(4),
            Keypoint::LeftShoulder => Some(5),
            Keypoint::RightShoulder => Some(6),
            Keypoint::LeftHip => Some(11),
            Keypoint::RightHip => Some(12),
            _ => None,
        };
        match (self, role) {
            (_, _) if common.is_some() => common,
            (KeypointSchema::Halpe26, Keypoint::Head) => Some(17),
            (KeypointSchema::Halpe26, Keypoint::Neck) => Some(18),
            (KeypointSchema::Halpe26, Keypoint::MidHip) => Some(19),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Point { x, y, confidence }
    }

    /// Undetected keypoints come out of the detector with zero confidence.
    pub fn is_missing(&self) -> bool {
        !(self.confidence > 0.0) || !self.x.is_finite() || !self.y.is_finite()
    }

    pub fn is_low_confidence(&self) -> bool {
        self.confidence < LOW_CONFIDENCE
    }
}

/// Axis-aligned box in pixels: top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn contains(&self, (px, py): (f64, f64)) -> bool {
        px >= self.x && px <= self.x + self.w && py >= self.y && py <= self.y + self.h
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        let inter = (x1 - x0).max(0.0) * (y1 - y0).max(0.0);
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointFrame {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub points: Vec<Point>,
    pub person_id: i64,
    pub bbox: BBox,
    /// Detection score reported by the upstream tool.
    pub score: f64,
    /// Set on frames synthesized by [`fill_gaps`].
    #[serde(default)]
    pub interpolated: bool,
}

impl KeypointFrame {
    pub fn point(&self, schema: KeypointSchema, role: Keypoint) -> Option<&Point> {
        schema.index(role).and_then(|i| self.points.get(i))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("fps must be positive, got {0}")]
    InvalidFps(f64),
    #[error("frame {frame_index}: expected {expected} keypoints, found {found}")]
    KeypointCount { frame_index: u64, expected: usize, found: usize },
    #[error("frame {frame_index}: confidence {confidence} outside [0, 1]")]
    Confidence { frame_index: u64, confidence: f64 },
    #[error("frame indices must be strictly increasing (frame {0} repeats or goes back)")]
    FrameOrder(u64),
    #[error("frame {frame_index} belongs to person {found}, track is person {expected}")]
    PersonMismatch { frame_index: u64, expected: i64, found: i64 },
    #[error("detection region must have positive width and height")]
    EmptyRegion,
    #[error("no track intersects the detection region")]
    NoSubject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseTrack {
    pub person_id: i64,
    pub fps: f64,
    pub schema: KeypointSchema,
    pub frames: Vec<KeypointFrame>,
}

impl PoseTrack {
    /// Checks the track invariants: positive fps, one schema, one person,
    /// strictly increasing frame indices.
    pub fn new(
        person_id: i64,
        fps: f64,
        schema: KeypointSchema,
        frames: Vec<KeypointFrame>,
    ) -> Result<Self, PoseError> {
        if !(fps > 0.0) || !fps.is_finite() {
            return Err(PoseError::InvalidFps(fps));
        }
        let expected = schema.keypoint_count();
        let mut last: Option<u64> = None;
        for frame in &frames {
            if frame.points.len() != expected {
                return Err(PoseError::KeypointCount {
                    frame_index: frame.frame_index,
                    expected,
                    found: frame.points.len(),
                });
            }
            if let Some(bad) = frame.points.iter().find(|p| !(0.0..=1.0).contains(&p.confidence)) {
                return Err(PoseError::Confidence { frame_index: frame.frame_index, confidence: bad.confidence });
            }
            if frame.person_id != person_id {
                return Err(PoseError::PersonMismatch {
                    frame_index: frame.frame_index,
                    expected: person_id,
                    found: frame.person_id,
                });
            }
            if last.is_some_and(|l| frame.frame_index <= l) {
                return Err(PoseError::FrameOrder(frame.frame_index));
            }
            last = Some(frame.frame_index);
        }
        Ok(PoseTrack { person_id, fps, schema, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    fn mean_area(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().map(|f| f.bbox.area()).sum::<f64>() / self.frames.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRegion(BBox);

impl DetectionRegion {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, PoseError> {
        if !(w > 0.0 && h > 0.0) {
            return Err(PoseError::EmptyRegion);
        }
        Ok(DetectionRegion(BBox::new(x, y, w, h)))
    }

    pub fn rect(&self) -> &BBox {
        &self.0
    }
}

/// Picks the track whose bbox center falls inside `region` on the largest
/// fraction of its frames. Ties go to the larger mean bbox area, then to the
/// lower person id.
pub fn select_subject<'a>(tracks: &'a [PoseTrack], region: &DetectionRegion) -> Result<&'a PoseTrack, PoseError> {
    let mut best: Option<(&PoseTrack, f64, f64)> = None;
    for track in tracks.iter().filter(|t| !t.is_empty()) {
        let inside = track.frames.iter().filter(|f| region.rect().contains(f.bbox.center())).count();
        if inside == 0 {
            continue;
        }
        let fraction = inside as f64 / track.len() as f64;
        let area = track.mean_area();
        let better = match best {
            None => true,
            Some((current, best_fraction, best_area)) => match fraction.total_cmp(&best_fraction) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => match area.total_cmp(&best_area) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => track.person_id < current.person_id,
                },
            },
        };
        if better {
            best = Some((track, fraction, area));
        }
    }
    best.map(|(t, _, _)| t).ok_or(PoseError::NoSubject)
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

/// Inserts linearly interpolated frames into gaps of at most `max_gap_frames`
/// missing indices. Interpolated keypoints take the lower endpoint confidence.
pub fn fill_gaps(track: &PoseTrack, max_gap_frames: u64) -> PoseTrack {
    let mut frames: Vec<KeypointFrame> = Vec::with_capacity(track.frames.len());
    for pair in track.frames.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        frames.push(a.clone());
        let missing = b.frame_index - a.frame_index - 1;
        if missing == 0 || missing > max_gap_frames {
            continue;
        }
        let span = (b.frame_index - a.frame_index) as f64;
        for k in 1..=missing {
            let w = k as f64 / span;
            let frame_index = a.frame_index + k;
            let points = a
                .points
                .iter()
                .zip(&b.points)
                .map(|(pa, pb)| Point {
                    x: lerp(pa.x, pb.x, w),
                    y: lerp(pa.y, pb.y, w),
                    confidence: pa.confidence.min(pb.confidence),
                })
                .collect();
            frames.push(KeypointFrame {
                frame_index,
                timestamp_s: frame_index as f64 / track.fps,
                points,
                person_id: a.person_id,
                bbox: BBox::new(
                    lerp(a.bbox.x, b.bbox.x, w),
                    lerp(a.bbox.y, b.bbox.y, w),
                    lerp(a.bbox.w, b.bbox.w, w),
                    lerp(a.bbox.h, b.bbox.h, w),
                ),
                score: a.score.min(b.score),
                interpolated: true,
            });
        }
    }
    if let Some(last) = track.frames.last() {
        frames.push(last.clone());
    }
    PoseTrack { person_id: track.person_id, fps: track.fps, schema: track.schema, frames }
}
