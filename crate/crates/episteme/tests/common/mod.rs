#![allow(dead_code)]

use std::path::{Path, PathBuf};

use episteme::eaf::write_eaf;
use episteme_core::agreement::{Annotation, Tier};
use episteme_core::synth::{self, Piece, TrajectorySpec};
use serde_json::json;

pub const SHOULDER_Y: f64 = 300.0;
pub const SHOULDER_WIDTH: f64 = 100.0;

/// One COCO17 record whose frontal proxy angle is `theta`: shoulders 100 px
/// apart at y = 300, nose `theta` px above their midpoint.
pub fn record(frame: usize, person: i64, x_offset: f64, theta: f64) -> serde_json::Value {
    let mut kp = vec![0.0; 51];
    let mut put = |i: usize, x: f64, y: f64| {
        kp[3 * i] = x + x_offset;
        kp[3 * i + 1] = y;
        kp[3 * i + 2] = 0.9;
    };
    put(0, 150.0, SHOULDER_Y - theta * SHOULDER_WIDTH / 100.0);
    put(3, 140.0, 190.0);
    put(4, 160.0, 190.0);
    put(5, 100.0, SHOULDER_Y);
    put(6, 200.0, SHOULDER_Y);
    put(11, 110.0, 500.0);
    put(12, 190.0, 500.0);
    json!({
        "image_id": format!("{frame:06}.jpg"),
        "keypoints": kp,
        "score": 2.8,
        "box": [80.0 + x_offset, 100.0, 140.0, 420.0],
        "idx": person,
    })
}

pub fn pose_json(thetas: &[f64]) -> String {
    let records: Vec<_> = thetas.iter().enumerate().map(|(i, &t)| record(i, 1, 0.0, t)).collect();
    serde_json::to_string(&records).unwrap()
}

/// Raw angles of a synthetic trajectory under the reference profile.
pub fn thetas(spec: &TrajectorySpec) -> Vec<f64> {
    let g = synth::generate(spec, &synth::reference_profile()).unwrap();
    g.raw.samples.iter().map(|s| s.theta_deg).collect()
}

pub fn hold(p: f64, duration_s: f64) -> Piece {
    Piece::HoldPiece { p, duration_s, wobble_p2p: 0.0 }
}

pub fn nod(center_p: f64, half_amp_p: f64, cycles: u32, cycle_s: f64) -> Piece {
    Piece::NodPiece { center_p, half_amp_p, cycles, cycle_s }
}

/// Neutral rest, a fast neutral-crossing nod burst, neutral rest.
pub fn cert_pattern() -> TrajectorySpec {
    TrajectorySpec::new(25.0, vec![hold(0.0, 2.4), nod(0.0, 0.3, 4, 0.6), hold(0.0, 2.4)])
}

/// A long flexed hold after a slow drift: uncertainty markers.
pub fn incert_pattern() -> TrajectorySpec {
    TrajectorySpec::new(
        25.0,
        vec![
            hold(0.0, 1.0),
            Piece::RampPiece { p_from: 0.0, p_to: 0.5, duration_s: 2.0 },
            hold(0.5, 3.0),
            Piece::RampPiece { p_from: 0.5, p_to: 0.0, duration_s: 2.0 },
        ],
    )
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

pub fn eaf(tiers: &[(&str, &[(u64, u64, &str)])]) -> String {
    let tiers: Vec<Tier> = tiers
        .iter()
        .map(|(id, spans)| Tier::new(*id, spans.iter().map(|&(s, e, v)| Annotation::new(s, e, v)).collect()).unwrap())
        .collect();
    write_eaf(&tiers, None).unwrap()
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("episteme").chain(args.iter().copied());
    let code = episteme::cli::run(argv, &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

/// Calibration clip: rest, full flexion, full extension, rest; one second each.
pub fn calibration_thetas(rest: f64, flx: f64, ext: f64) -> Vec<f64> {
    let mut v = Vec::new();
    for target in [rest, flx, ext, rest] {
        v.extend(std::iter::repeat_n(target, 25));
    }
    v
}

pub fn calibration_eaf() -> String {
    eaf(&[("CALIB", &[(400, 600, "REST"), (1400, 1600, "FLX_LIMIT"), (2400, 2600, "EXT_LIMIT")])])
}
