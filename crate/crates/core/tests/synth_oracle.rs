use episteme_core::calibration::Notch;
use episteme_core::markers::{Family, MarkerEvent, MarkerKind};
use episteme_core::synth::{evaluate, fixture_suite, generate, reference_profile, GroundTruth, Piece, SynthError, TrajectorySpec};

fn hold(p: f64, d: f64) -> Piece {
    Piece::HoldPiece { p, duration_s: d, wobble_p2p: 0.0 }
}

fn of(truth: &GroundTruth, f: Family) -> Vec<MarkerEvent> {
    truth.events.iter().filter(|e| e.family() == f).copied().collect()
}

#[test]
fn flexed_hold_plants_one_hold() {
    let g = generate(&TrajectorySpec::new(25.0, vec![hold(0.5, 2.5)]), &reference_profile()).unwrap();
    let holds = of(&g.truth, Family::Hold);
    assert_eq!(holds.len(), 1);
    assert_eq!((holds[0].start_s, holds[0].end_s), (0.0, 2.5));
    assert!(matches!(holds[0].kind, MarkerKind::Hold { median_notch: Notch::FlxMoyen, non_neutral: true, .. }));
    assert_eq!(g.raw.len(), 63);
    assert!(g.raw.samples.iter().all(|s| s.theta_deg == 122.0));
}

#[test]
fn crossing_nod_and_its_peak_speed() {
    let spec = TrajectorySpec::new(25.0, vec![Piece::NodPiece { center_p: 0.05, half_amp_p: 0.25, cycles: 2, cycle_s: 0.6 }]);
    let g = generate(&spec, &reference_profile()).unwrap();
    let nods = of(&g.truth, Family::NodBurst);
    assert_eq!(nods.len(), 1);
    let MarkerKind::NodBurst { cycles, crosses_neutral, max_peak_to_peak_p, peak_speed_deg_s } = nods[0].kind else {
        unreachable!()
    };
    assert_eq!((cycles, crosses_neutral), (2, true));
    assert!((max_peak_to_peak_p - 0.5).abs() < 1e-12);
    // 2*pi*0.25/0.6 p/s on the flexion side, 36 degrees per unit p.
    let closed_form = 2.0 * std::f64::consts::PI * 0.25 / 0.6 * 36.0;
    assert!((closed_form - 94.2477796076938).abs() < 1e-9);
    // The fastest point is where the sine crosses its center, inside the flexion side.
    assert!((peak_speed_deg_s - closed_form).abs() / closed_form < 1e-5, "{peak_speed_deg_s}");
}

#[test]
fn confined_nod_does_not_cross() {
    let spec = TrajectorySpec::new(25.0, vec![Piece::NodPiece { center_p: 0.3, half_amp_p: 0.15, cycles: 3, cycle_s: 0.6 }]);
    let g = generate(&spec, &reference_profile()).unwrap();
    assert!(matches!(of(&g.truth, Family::NodBurst)[0].kind, MarkerKind::NodBurst { crosses_neutral: false, cycles: 3, .. }));
}

#[test]
fn short_holds_are_not_planted() {
    let g = generate(&TrajectorySpec::new(25.0, vec![hold(0.5, 1.9)]), &reference_profile()).unwrap();
    assert!(of(&g.truth, Family::Hold).is_empty());
}

#[test]
fn pieces_must_tile_the_duration() {
    let mut spec = TrajectorySpec::new(25.0, vec![hold(0.0, 1.0), hold(0.2, 1.0)]);
    spec.duration_s = 2.5;
    assert!(matches!(generate(&spec, &reference_profile()), Err(SynthError::Tiling { .. })));
    let bad = TrajectorySpec::new(25.0, vec![Piece::NodPiece { center_p: 0.0, half_amp_p: 0.0, cycles: 2, cycle_s: 0.5 }]);
    assert!(matches!(generate(&bad, &reference_profile()), Err(SynthError::Spec(_))));
    let bad = TrajectorySpec::new(25.0, vec![hold(0.0, -1.0)]);
    assert!(generate(&bad, &reference_profile()).is_err());
}

#[test]
fn seed_controls_only_the_noise() {
    let profile = reference_profile();
    let base = TrajectorySpec::new(25.0, vec![hold(0.2, 3.0), Piece::RampPiece { p_from: 0.2, p_to: -0.4, duration_s: 1.0 }]);
    let a = generate(&base.clone().with_noise(0.02, 7, 5), &profile).unwrap();
    let b = generate(&base.clone().with_noise(0.02, 7, 5), &profile).unwrap();
    let c = generate(&base.clone().with_noise(0.02, 8, 5), &profile).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.raw, c.raw);
    assert_eq!(a.truth, c.truth);
    let clean = generate(&base, &profile).unwrap();
    assert_eq!(clean.truth, a.truth);
    // Same noise level around the same signal.
    let dev = |g: &episteme_core::synth::Generated| {
        g.raw.samples.iter().zip(&clean.raw.samples).map(|(x, y)| (x.theta_deg - y.theta_deg).abs()).fold(0.0, f64::max)
    };
    assert!(dev(&a) > 0.0 && dev(&c) > 0.0 && dev(&a) < 4.0 && dev(&c) < 4.0);
}

#[test]
fn evaluation_counting() {
    let profile = reference_profile();
    let (_, spec) = fixture_suite().into_iter().find(|(n, _)| n == "long-mixed").unwrap();
    let truth = generate(&spec, &profile).unwrap().truth;
    let perfect = evaluate(&truth.events, &truth, 0.5);
    for f in Family::ALL {
        assert_eq!((perfect.get(f).precision(), perfect.get(f).recall()), (1.0, 1.0));
    }
    let none = evaluate(&[], &truth, 0.5);
    assert_eq!(none.hold.recall(), 0.0);
    assert_eq!(none.hold.precision(), 1.0);

    let holds = of(&truth, Family::Hold);
    let n = holds.len();
    let mut extra = truth.events.clone();
    extra.push(holds[0].shifted(100.0));
    let e = evaluate(&extra, &truth, 0.5);
    assert_eq!(e.hold.precision(), n as f64 / (n as f64 + 1.0));
    assert_eq!(e.hold.recall(), 1.0);

    // A duplicate can only match once.
    let mut dup = truth.events.clone();
    dup.push(holds[0]);
    assert_eq!(evaluate(&dup, &truth, 0.5).hold.matched, n);
}

#[test]
fn speed_band_must_agree_on_band() {
    let profile = reference_profile();
    let spec = TrajectorySpec::new(25.0, vec![hold(0.0, 3.0)]);
    let truth = generate(&spec, &profile).unwrap().truth;
    let mut wrong = truth.events.clone();
    for e in &mut wrong {
        if let MarkerKind::SpeedBand { band, .. } = &mut e.kind {
            *band = episteme_core::markers::SpeedBandKind::High;
        }
    }
    assert_eq!(evaluate(&wrong, &truth, 0.5).speed.matched, 0);
}

#[test]
fn suite_is_large_and_varied() {
    let suite = fixture_suite();
    assert!(suite.len() >= 20);
    let profile = reference_profile();
    let mut micro = 0;
    let mut families = [0usize; 3];
    for (_, spec) in &suite {
        let g = generate(spec, &profile).unwrap();
        for e in &g.truth.events {
            families[e.family() as usize] += 1;
            if let MarkerKind::Hold { micro_oscillation: true, .. } = e.kind {
                micro += 1;
            }
        }
        assert!(spec.noise_sigma_p == 0.0);
    }
    assert!(families.iter().all(|&c| c >= 10), "{families:?}");
    assert!(micro >= 3);
    assert!(suite.iter().filter(|(_, s)| s.pieces.iter().any(|p| matches!(p, Piece::RampPiece { .. }))).count() >= 5);
}
