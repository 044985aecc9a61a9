use episteme_core::calibration::NormalizedSeries;
use episteme_core::kinematics::VelocitySeries;
use episteme_core::markers::{detect_all, detect_holds, detect_nods, DetectorConfig, Family, MarkerEvent, MarkerKind, SpeedBandKind};
use episteme_core::synth::{fixture_suite, generate, reference_profile, Piece, TrajectorySpec};
use episteme_core::CalibrationProfile;
use proptest::prelude::*;

fn detect(spec: &TrajectorySpec, profile: &CalibrationProfile) -> Vec<MarkerEvent> {
    let g = generate(spec, profile).unwrap();
    detect_all(&g.norm, &g.vel, &DetectorConfig::default()).unwrap()
}

fn of_family(events: &[MarkerEvent], f: Family) -> Vec<MarkerEvent> {
    events.iter().filter(|e| e.family() == f).copied().collect()
}

fn shift(norm: &NormalizedSeries, vel: &VelocitySeries, dt: f64) -> (NormalizedSeries, VelocitySeries) {
    let mut n = norm.clone();
    let mut v = vel.clone();
    n.samples.iter_mut().for_each(|s| s.t_s += dt);
    v.samples.iter_mut().for_each(|s| s.t_s += dt);
    (n, v)
}

#[test]
fn same_family_intervals_never_overlap() {
    let profile = reference_profile();
    for (name, spec) in fixture_suite() {
        let events = detect(&spec, &profile);
        for f in [Family::Hold, Family::NodBurst] {
            let mut e = of_family(&events, f);
            e.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
            for w in e.windows(2) {
                assert!(w[0].end_s <= w[1].start_s + 1e-9, "{name}: {:?}", w);
            }
            for x in &e {
                assert!(x.start_s < x.end_s);
                if let MarkerKind::Hold { duration_s, .. } = x.kind {
                    assert!(duration_s + 1e-9 >= DetectorConfig::default().hold_min_s);
                }
                if let MarkerKind::NodBurst { cycles, .. } = x.kind {
                    assert!(cycles >= 1);
                }
            }
        }
    }
}

#[test]
fn time_shift_moves_every_interval() {
    let profile = reference_profile();
    let cfg = DetectorConfig::default();
    for (name, spec) in fixture_suite() {
        let g = generate(&spec, &profile).unwrap();
        let base = detect_all(&g.norm, &g.vel, &cfg).unwrap();
        for dt in [3.5, 100.25, 0.04] {
            let (n, v) = shift(&g.norm, &g.vel, dt);
            let moved = detect_all(&n, &v, &cfg).unwrap();
            assert_eq!(base.len(), moved.len(), "{name}");
            for (a, b) in base.iter().zip(&moved) {
                assert_eq!(a.kind, b.kind, "{name}");
                assert!((a.start_s + dt - b.start_s).abs() < 1e-9 && (a.end_s + dt - b.end_s).abs() < 1e-9, "{name}");
            }
        }
    }
}

/// Everything about a hold or nod apart from velocity-derived magnitudes.
fn shape(e: &MarkerEvent) -> (i64, i64, String) {
    let key = match e.kind {
        MarkerKind::NodBurst { cycles, crosses_neutral, max_peak_to_peak_p, .. } => {
            format!("NOD {cycles} {crosses_neutral} {max_peak_to_peak_p:.12}")
        }
        MarkerKind::Hold { median_notch, non_neutral, .. } => format!("HOLD {median_notch} {non_neutral}"),
        MarkerKind::SpeedBand { .. } => String::from("SPEED"),
    };
    ((e.start_s * 1e6).round() as i64, (e.end_s * 1e6).round() as i64, key)
}

#[test]
fn doubling_raw_angles_and_anchors_keeps_holds_and_nods() {
    let profile = reference_profile();
    let doubled = CalibrationProfile::neck("synthetic", 208.0, 280.0, 176.0).unwrap();
    for (name, spec) in fixture_suite() {
        let a = generate(&spec, &profile).unwrap();
        let b = generate(&spec, &doubled).unwrap();
        for (x, y) in a.raw.samples.iter().zip(&b.raw.samples) {
            assert!((2.0 * x.theta_deg - y.theta_deg).abs() < 1e-9);
        }
        for (x, y) in a.norm.samples.iter().zip(&b.norm.samples) {
            assert!((x.p - y.p).abs() < 1e-12 && x.notch == y.notch, "{name}");
        }
        let ea = detect_all(&a.norm, &a.vel, &DetectorConfig::default()).unwrap();
        let eb = detect_all(&b.norm, &b.vel, &DetectorConfig::default()).unwrap();
        let sa: Vec<_> = of_family(&ea, Family::NodBurst).iter().map(shape).collect();
        let sb: Vec<_> = of_family(&eb, Family::NodBurst).iter().map(shape).collect();
        assert_eq!(sa, sb, "{name}");
        let (ha, hb) = (of_family(&ea, Family::Hold), of_family(&eb, Family::Hold));
        let wobbles = spec.pieces.iter().any(|p| matches!(p, Piece::HoldPiece { wobble_p2p, .. } if *wobble_p2p > 0.0));
        if wobbles {
            // Stillness is judged in raw degrees/second, so doubled wobble
            // speed shortens the still runs a wobbling hold is built from.
            // The hold survives with the same attributes and still matches
            // under the oracle's IoU rule.
            assert_eq!(ha.len(), hb.len(), "{name}");
            for (x, y) in ha.iter().zip(&hb) {
                assert!(x.iou(y) >= 0.5, "{name}: {x:?} vs {y:?}");
                assert_eq!(shape(x).2, shape(y).2, "{name}");
            }
        } else {
            // Only the frame whose central difference straddles the edge of
            // the motion can change sides.
            assert_eq!(ha.len(), hb.len(), "{name}");
            for (x, y) in ha.iter().zip(&hb) {
                let frame = 1.0 / spec.fps + 1e-9;
                assert!((x.start_s - y.start_s).abs() <= frame && (x.end_s - y.end_s).abs() <= frame, "{name}");
                assert_eq!(shape(x).2, shape(y).2, "{name}");
            }
        }
    }
}

#[test]
fn detection_is_deterministic() {
    let profile = reference_profile();
    for (_, spec) in fixture_suite() {
        let a = format!("{:?}", detect(&spec, &profile));
        let b = format!("{:?}", detect(&spec, &profile));
        assert_eq!(a, b);
    }
}

#[test]
fn constant_series_is_one_hold_and_low_band() {
    let spec = TrajectorySpec::new(25.0, vec![Piece::HoldPiece { p: 0.0, duration_s: 4.0, wobble_p2p: 0.0 }]);
    let events = detect(&spec, &reference_profile());
    assert_eq!(events.len(), 2);
    assert_eq!(events[0].family(), Family::Hold);
    assert!(matches!(events[1].kind, MarkerKind::SpeedBand { band: SpeedBandKind::Low, stat_deg_s } if stat_deg_s == 0.0));
}

#[test]
fn monotone_ramp_has_no_nods() {
    let spec = TrajectorySpec::new(25.0, vec![Piece::RampPiece { p_from: -0.9, p_to: 0.9, duration_s: 3.0 }]);
    let g = generate(&spec, &reference_profile()).unwrap();
    assert!(detect_nods(&g.norm, &g.vel, &DetectorConfig::default()).unwrap().is_empty());
}

#[test]
fn misaligned_inputs_are_rejected() {
    let spec = TrajectorySpec::new(25.0, vec![Piece::HoldPiece { p: 0.0, duration_s: 1.0, wobble_p2p: 0.0 }]);
    let g = generate(&spec, &reference_profile()).unwrap();
    let mut vel = g.vel.clone();
    vel.samples.pop();
    assert!(detect_holds(&g.norm, &vel, &DetectorConfig::default()).is_err());
    let (_, shifted) = shift(&g.norm, &g.vel, 0.01);
    assert!(detect_nods(&g.norm, &shifted, &DetectorConfig::default()).is_err());
}

#[test]
fn mixed_pattern_has_hold_and_nod() {
    let (_, spec) = fixture_suite().into_iter().find(|(n, _)| n == "neutral-ext-flex-nods").unwrap();
    let events = detect(&spec, &reference_profile());
    assert!(!of_family(&events, Family::Hold).is_empty());
    assert_eq!(of_family(&events, Family::NodBurst).len(), 1);
}

/// Events of a two-part sequence equal the events of each part, away from
/// the seam.
#[test]
fn concatenation_unions_events_away_from_seam() {
    let first = vec![
        Piece::HoldPiece { p: 0.4, duration_s: 3.0, wobble_p2p: 0.0 },
        Piece::NodPiece { center_p: 0.4, half_amp_p: 0.2, cycles: 3, cycle_s: 0.6 },
        Piece::HoldPiece { p: 0.4, duration_s: 1.0, wobble_p2p: 0.0 },
    ];
    let second = vec![
        Piece::HoldPiece { p: 0.4, duration_s: 1.0, wobble_p2p: 0.0 },
        Piece::NodPiece { center_p: 0.4, half_amp_p: 0.15, cycles: 2, cycle_s: 0.5 },
        Piece::HoldPiece { p: 0.4, duration_s: 2.8, wobble_p2p: 0.0 },
    ];
    let profile = reference_profile();
    let shapes = |spec: &TrajectorySpec, dt: f64| -> Vec<(i64, i64, String)> {
        detect(spec, &profile)
            .iter()
            .filter(|e| e.family() != Family::SpeedBand)
            .map(|e| shape(&e.shifted(dt)))
            .collect()
    };
    let a = TrajectorySpec::new(25.0, first.clone());
    let b = TrajectorySpec::new(25.0, second.clone());
    let whole = TrajectorySpec::new(25.0, first.into_iter().chain(second).collect());
    let seam = a.duration_s;
    let mut parts = shapes(&a, 0.0);
    parts.extend(shapes(&b, seam));
    // The hold straddling the seam is the only event that differs.
    let away = |v: Vec<(i64, i64, String)>| -> Vec<(i64, i64, String)> {
        v.into_iter().filter(|(s, e, _)| *e < ((seam - 0.5) * 1e6) as i64 || *s > ((seam + 0.5) * 1e6) as i64).collect()
    };
    let joined = away(shapes(&whole, 0.0));
    assert_eq!(away(parts), joined);
    assert_eq!(joined.iter().filter(|x| x.2.starts_with("NOD")).count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nod_piece_gives_its_cycle_count(
        center in -0.5f64..0.5, amp in 0.05f64..0.3, cycles in 1u32..7, cycle_s in 0.4f64..0.8, lead in 1.0f64..3.0,
    ) {
        prop_assume!((center - amp) >= -1.0 && (center + amp) <= 1.0);
        let spec = TrajectorySpec::new(25.0, vec![
            Piece::HoldPiece { p: center, duration_s: lead, wobble_p2p: 0.0 },
            Piece::NodPiece { center_p: center, half_amp_p: amp, cycles, cycle_s },
            Piece::HoldPiece { p: center, duration_s: lead, wobble_p2p: 0.0 },
        ]);
        let nods: Vec<_> = of_family(&detect(&spec, &reference_profile()), Family::NodBurst);
        prop_assert_eq!(nods.len(), 1);
        let MarkerKind::NodBurst { cycles: got, .. } = nods[0].kind else { unreachable!() };
        prop_assert_eq!(got, cycles);
    }
}
