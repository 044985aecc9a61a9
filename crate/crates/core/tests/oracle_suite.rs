use episteme_core::markers::{detect_all, DetectorConfig, Family};
use episteme_core::synth::{evaluate, fixture_suite, generate, noisy_suite, reference_profile, Evaluation};

/// Totals over a suite, printing the events of every imperfect fixture.
fn run(suite: Vec<(String, episteme_core::synth::TrajectorySpec)>, verbose: bool) -> Evaluation {
    let profile = reference_profile();
    let cfg = DetectorConfig::default();
    let mut total = Evaluation::default();
    for (name, spec) in suite {
        let g = generate(&spec, &profile).unwrap();
        let detected = detect_all(&g.norm, &g.vel, &cfg).unwrap();
        let e = evaluate(&detected, &g.truth, 0.5);
        let perfect = Family::ALL.iter().all(|&f| e.get(f).matched == e.get(f).planted && e.get(f).matched == e.get(f).detected);
        if verbose && !perfect {
            println!("== {name}\n  truth:    {:?}\n  detected: {:?}", g.truth.events, detected);
        }
        total.add(&e);
    }
    total
}

#[test]
fn noise_free_suite_is_recovered_exactly() {
    let total = run(fixture_suite(), true);
    for f in Family::ALL {
        let s = total.get(f);
        assert_eq!((s.precision(), s.recall()), (1.0, 1.0), "{f:?}: {s:?}");
    }
}

#[test]
fn noisy_suite_keeps_f1() {
    let total = run(noisy_suite(0.02), true);
    for f in Family::ALL {
        let s = total.get(f);
        assert!(s.f1() >= 0.9, "{f:?}: {s:?} f1 {}", s.f1());
    }
}
