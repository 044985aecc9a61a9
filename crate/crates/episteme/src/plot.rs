//! Two stacked SVG charts: position on top, velocity below.
//!
//! With a calibration profile the position chart is drawn on the normalized
//! scale, with notch boundaries as gridlines and the neutral band shaded.
//! Without one it shows raw degrees. Hold and nod intervals are drawn as
//! translucent boxes over both charts. Numbers are printed with fixed
//! precision so identical inputs give identical bytes.

use std::fmt::Write;

use episteme_core::calibration::{CalibrationProfile, NOTCH_BOUNDARIES};
use episteme_core::markers::{MarkerEvent, MarkerKind};
use thiserror::Error;

use crate::tables::SeriesRow;

const WIDTH: f64 = 900.0;
const CHART_H: f64 = 240.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const GAP: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("series is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotOptions {
    pub speed_high: f64,
    pub speed_low: f64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions { speed_high: 40.0, speed_low: 20.0 }
    }
}

/// `x` with 2 decimals and no negative zero.
fn n2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn n_label(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

struct Frame {
    top: f64,
    t0: f64,
    t1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, t: f64) -> f64 {
        LEFT + (t - self.t0) / (self.t1 - self.t0) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        self.top + (self.y1 - v) / (self.y1 - self.y0) * CHART_H
    }

    fn hline(&self, out: &mut String, v: f64, class: &str) {
        let _ = writeln!(
            out,
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
            n2(LEFT),
            n2(self.y(v)),
            n2(WIDTH - RIGHT),
            n2(self.y(v))
        );
    }

    fn tick(&self, out: &mut String, v: f64) {
        let _ = writeln!(
            out,
            "<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            n2(LEFT - 6.0),
            n2(self.y(v) + 4.0),
            n_label(v)
        );
    }

    fn axes(&self, out: &mut String, title: &str) {
        let _ = writeln!(
            out,
            "<rect class=\"frame\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>",
            n2(LEFT),
            n2(self.top),
            n2(WIDTH - LEFT - RIGHT),
            n2(CHART_H)
        );
        let _ = writeln!(out, "<text class=\"title\" x=\"{}\" y=\"{}\">{}</text>", n2(LEFT), n2(self.top - 8.0), title);
    }

    fn polyline(&self, out: &mut String, class: &str, points: impl Iterator<Item = (f64, f64)>) {
        let pts: Vec<String> = points.map(|(t, v)| format!("{},{}", n2(self.x(t)), n2(self.y(v)))).collect();
        let _ = writeln!(out, "<polyline class=\"{class}\" points=\"{}\"/>", pts.join(" "));
    }

    fn boxes(&self, out: &mut String, events: &[MarkerEvent]) {
        for e in events {
            let class = match e.kind {
                MarkerKind::Hold { .. } => "marker hold",
                MarkerKind::NodBurst { .. } => "marker nod",
                MarkerKind::SpeedBand { .. } => continue,
            };
            let (a, b) = (self.x(e.start_s.max(self.t0)), self.x(e.end_s.min(self.t1)));
            let _ = writeln!(
                out,
                "<rect class=\"{class}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>",
                n2(a),
                n2(self.top),
                n2((b - a).max(0.0)),
                n2(CHART_H)
            );
        }
    }
}

fn time_ticks(out: &mut String, f: &Frame, bottom: f64) {
    let span = f.t1 - f.t0;
    let step = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 60.0, 120.0, 300.0, 600.0]
        .into_iter()
        .find(|s| span / s <= 12.0)
        .unwrap_or(span / 10.0);
    let mut k = (f.t0 / step).ceil() as i64;
    while k as f64 * step <= f.t1 + 1e-9 {
        let t = k as f64 * step;
        let _ = writeln!(
            out,
            "<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            n2(f.x(t)),
            n2(bottom + 16.0),
            n_label(t)
        );
        k += 1;
    }
}

pub fn plot_svg(
    rows: &[SeriesRow],
    events: &[MarkerEvent],
    profile: Option<&CalibrationProfile>,
    opts: &PlotOptions,
) -> Result<String, PlotError> {
    let (first, last) = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(PlotError::Empty),
    };
    let dt = if rows.len() > 1 { (last.t_s - first.t_s) / (rows.len() - 1) as f64 } else { 1.0 };
    let (t0, t1) = (first.t_s, last.t_s + dt);

    let position: Vec<f64> = rows.iter().map(|r| profile.map_or(r.theta_deg, |p| p.normalize(r.theta_deg))).collect();
    let (y0, y1) = match profile {
        Some(_) => (-1.0, 1.0),
        None => {
            let lo = position.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = position.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = ((hi - lo) * 0.1).max(1.0);
            (lo - pad, hi + pad)
        }
    };
    let pos = Frame { top: TOP, t0, t1, y0, y1 };
    let vmax = rows.iter().map(|r| r.v_deg_s.abs()).fold(opts.speed_high * 1.5, f64::max);
    let vel = Frame { top: TOP + CHART_H + GAP, t0, t1, y0: -vmax, y1: vmax };
    let height = vel.top + CHART_H + 30.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        n2(WIDTH),
        n2(height),
        n2(WIDTH),
        n2(height)
    );
    out.push_str(
        "<style>\n\
         .frame{fill:none;stroke:#444;stroke-width:1}\n\
         .grid{stroke:#bbb;stroke-width:0.5}\n\
         .zero{stroke:#888;stroke-width:0.8}\n\
         .guide-high{stroke:#c33;stroke-width:0.8;stroke-dasharray:6 3}\n\
         .guide-low{stroke:#36c;stroke-width:0.8;stroke-dasharray:2 3}\n\
         .neutral{fill:#2a2;fill-opacity:0.12}\n\
         .hold{fill:#e90;fill-opacity:0.25}\n\
         .nod{fill:#39f;fill-opacity:0.25}\n\
         .curve{fill:none;stroke:#000;stroke-width:1.2}\n\
         .tick,.title{font-family:sans-serif;font-size:11px;fill:#333}\n\
         </style>\n",
    );

    // Position chart.
    match profile {
        Some(_) => {
            let (a, b) = (pos.y(NOTCH_BOUNDARIES[0]), pos.y(-NOTCH_BOUNDARIES[0]));
            let _ = writeln!(
                out,
                "<rect class=\"neutral\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>",
                n2(LEFT),
                n2(a),
                n2(WIDTH - LEFT - RIGHT),
                n2(b - a)
            );
            for &b in NOTCH_BOUNDARIES.iter().rev() {
                pos.hline(&mut out, -b, "grid notch");
            }
            for &b in &NOTCH_BOUNDARIES {
                pos.hline(&mut out, b, "grid notch");
            }
            for v in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                pos.tick(&mut out, v);
            }
        }
        None => {
            for k in 0..=4 {
                pos.tick(&mut out, y0 + (y1 - y0) * k as f64 / 4.0);
            }
        }
    }
    pos.boxes(&mut out, events);
    pos.polyline(&mut out, "curve position", rows.iter().zip(&position).map(|(r, &p)| (r.t_s, p)));
    pos.axes(&mut out, if profile.is_some() { "position (normalized)" } else { "position (raw degrees)" });

    // Velocity chart.
    vel.hline(&mut out, 0.0, "zero");
    for (v, class) in [
        (opts.speed_high, "guide-high"),
        (-opts.speed_high, "guide-high"),
        (opts.speed_low, "guide-low"),
        (-opts.speed_low, "guide-low"),
    ] {
        vel.hline(&mut out, v, class);
        vel.tick(&mut out, v);
    }
    vel.tick(&mut out, 0.0);
    vel.boxes(&mut out, events);
    vel.polyline(&mut out, "curve velocity", rows.iter().map(|r| (r.t_s, r.v_deg_s)));
    let band = events.iter().find_map(|e| match e.kind {
        MarkerKind::SpeedBand { band, stat_deg_s } => Some(format!(" - speed {} ({} deg/s)", band.as_str(), n2(stat_deg_s))),
        _ => None,
    });
    vel.axes(&mut out, &format!("velocity (deg/s){}", band.unwrap_or_default()));
    time_ticks(&mut out, &vel, vel.top + CHART_H);
    out.push_str("</svg>\n");
    Ok(out)
}
