//! AlphaPose-style results JSON: a top-level array of per-detection records.
//!
//! ```json
//! [{"image_id": "000012.jpg", "keypoints": [x, y, score, ...], "score": 2.9,
//!   "box": [x, y, w, h], "idx": 1}]
//! ```
//!
//! Person identity comes from `idx` when every record carries it; otherwise
//! detections are chained frame to frame by greedy bounding-box IoU.

use std::collections::BTreeMap;

use episteme_core::pose::{BBox, KeypointFrame, KeypointSchema, Point, PoseError, PoseTrack};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Smallest IoU for two detections in consecutive frames to be the same person.
pub const IDENTITY_MIN_IOU: f64 = 0.3;

#[derive(Debug, Error)]
pub enum PoseFileError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("record {record}: {message}")]
    Record { record: usize, message: String },
    #[error("record {record}: expected {expected} keypoints for {schema}, found {found} values")]
    Schema { record: usize, schema: &'static str, expected: usize, found: usize },
    #[error(transparent)]
    Track(#[from] PoseError),
}

#[derive(Debug, Deserialize, Serialize)]
struct Record {
    image_id: Value,
    keypoints: Vec<f64>,
    #[serde(default)]
    score: f64,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    idx: Option<Value>,
}

pub fn schema_name(schema: KeypointSchema) -> &'static str {
    match schema {
        KeypointSchema::Coco17 => "coco17",
        KeypointSchema::Halpe26 => "halpe26",
    }
}

/// Byte offset of a 1-based line/column position.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut current = 1;
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if current == line {
            break;
        }
        if b == b'\n' {
            current += 1;
            start = i + 1;
        }
    }
    (start + column.saturating_sub(1)).min(bytes.len())
}

/// Frame index from an integer, or from the last run of digits in a string.
fn frame_index(record: usize, id: &Value) -> Result<u64, PoseFileError> {
    let bad = |message: String| PoseFileError::Record { record, message };
    match id {
        Value::Number(n) => n.as_u64().ok_or_else(|| bad(format!("image_id {n} is not a non-negative integer"))),
        Value::String(s) => {
            let digits: String = {
                let end = s.rfind(|c: char| c.is_ascii_digit()).ok_or_else(|| bad(format!("image_id {s:?} has no digits")))?;
                let head = &s[..=end];
                let start = head.rfind(|c: char| !c.is_ascii_digit()).map_or(0, |i| i + 1);
                head[start..].to_string()
            };
            digits.parse().map_err(|_| bad(format!("image_id {s:?} frame number out of range")))
        }
        other => Err(bad(format!("image_id must be a string or integer, found {other}"))),
    }
}

fn person_index(record: usize, idx: &Value) -> Result<i64, PoseFileError> {
    let n = match idx {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        // Some tracker outputs wrap the id in a one-element list.
        Value::Array(items) if items.len() == 1 => return person_index(record, &items[0]),
        _ => None,
    };
    n.ok_or_else(|| PoseFileError::Record { record, message: format!("idx {idx} is not an integer") })
}

/// Tight box around the keypoints that were detected at all.
fn keypoint_box(points: &[Point]) -> BBox {
    let seen: Vec<&Point> = points.iter().filter(|p| !p.is_missing()).collect();
    if seen.is_empty() {
        return BBox::default();
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in seen {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    BBox::new(x0, y0, x1 - x0, y1 - y0)
}

struct Detection {
    frame_index: u64,
    person: Option<i64>,
    frame: KeypointFrame,
}

/// Parses a results file into one track per person, ordered by person id.
///
/// With `schema` unset, the schema follows from the first record's keypoint
/// count. Every record lands in exactly one track.
pub fn parse_pose_file(bytes: &[u8], schema: Option<KeypointSchema>, fps: f64) -> Result<Vec<PoseTrack>, PoseFileError> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(PoseError::InvalidFps(fps).into());
    }
    let records: Vec<Record> = serde_json::from_slice(bytes).map_err(|e| PoseFileError::Json {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let Some(first) = records.first() else { return Ok(Vec::new()) };
    let schema = match schema {
        Some(s) => s,
        None => KeypointSchema::from_keypoint_count(first.keypoints.len() / 3).ok_or(PoseFileError::Schema {
            record: 0,
            schema: "coco17 or halpe26",
            expected: 17,
            found: first.keypoints.len(),
        })?,
    };
    let expected = schema.keypoint_count();

    let mut detections = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r.keypoints.len() != 3 * expected {
            return Err(PoseFileError::Schema { record: i, schema: schema_name(schema), expected, found: r.keypoints.len() });
        }
        let index = frame_index(i, &r.image_id)?;
        let points: Vec<Point> =
            r.keypoints.chunks_exact(3).map(|c| Point::new(c[0], c[1], c[2].clamp(0.0, 1.0))).collect();
        let bbox = r.bbox.map_or_else(|| keypoint_box(&points), |[x, y, w, h]| BBox::new(x, y, w, h));
        let person = r.idx.as_ref().map(|v| person_index(i, v)).transpose()?;
        detections.push(Detection {
            frame_index: index,
            person,
            frame: KeypointFrame {
                frame_index: index,
                timestamp_s: index as f64 / fps,
                points,
                person_id: 0,
                bbox,
                score: r.score,
                interpolated: false,
            },
        });
    }

    let ids: Vec<i64> = if detections.iter().all(|d| d.person.is_some()) {
        detections.iter().map(|d| d.person.unwrap_or_default()).collect()
    } else {
        assign_by_iou(&detections)
    };

    let mut by_person: BTreeMap<i64, Vec<KeypointFrame>> = BTreeMap::new();
    for (d, id) in detections.into_iter().zip(ids) {
        let mut frame = d.frame;
        frame.person_id = id;
        by_person.entry(id).or_default().push(frame);
    }
    by_person
        .into_iter()
        .map(|(id, mut frames)| {
            frames.sort_by_key(|f| f.frame_index);
            PoseTrack::new(id, fps, schema, frames).map_err(PoseFileError::from)
        })
        .collect()
}

/// Greedy identity assignment: detections of each frame are matched to the
/// latest box of every existing identity by descending IoU.
fn assign_by_iou(detections: &[Detection]) -> Vec<i64> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by_key(|&i| (detections[i].frame_index, i));
    let mut ids = vec![0i64; detections.len()];
    let mut last_box: Vec<(u64, BBox)> = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let frame = detections[order[k]].frame_index;
        let mut group = Vec::new();
        while k < order.len() && detections[order[k]].frame_index == frame {
            group.push(order[k]);
            k += 1;
        }
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for &d in &group {
            for (id, (seen, bbox)) in last_box.iter().enumerate() {
                let iou = detections[d].frame.bbox.iou(bbox);
                if *seen < frame && iou >= IDENTITY_MIN_IOU {
                    pairs.push((iou, d, id));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut taken_d = Vec::new();
        let mut taken_id = Vec::new();
        for (_, d, id) in pairs {
            if taken_d.contains(&d) || taken_id.contains(&id) {
                continue;
            }
            taken_d.push(d);
            taken_id.push(id);
            ids[d] = id as i64;
        }
        for &d in &group {
            if !taken_d.contains(&d) {
                last_box.push((frame, detections[d].frame.bbox));
                ids[d] = (last_box.len() - 1) as i64;
            } else {
                last_box[ids[d] as usize] = (frame, detections[d].frame.bbox);
            }
        }
    }
    ids
}

/// Serializes tracks back to a results file, records ordered by frame then person.
pub fn write_pose_file(tracks: &[PoseTrack]) -> String {
    let mut frames: Vec<&KeypointFrame> = tracks.iter().flat_map(|t| t.frames.iter()).filter(|f| !f.interpolated).collect();
    frames.sort_by_key(|f| (f.frame_index, f.person_id));
    let records: Vec<Record> = frames
        .into_iter()
        .map(|f| Record {
            image_id: Value::from(f.frame_index),
            keypoints: f.points.iter().flat_map(|p| [p.x, p.y, p.confidence]).collect(),
            score: f.score,
            bbox: Some([f.bbox.x, f.bbox.y, f.bbox.w, f.bbox.h]),
            idx: Some(Value::from(f.person_id)),
        })
        .collect();
    let mut out = serde_json::to_string(&records).unwrap_or_else(|_| String::from("[]"));
    out.push('\n');
    out
}
