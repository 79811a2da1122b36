use hypodecay::analyze::*;
use hypodecay::experiments::{self, heat_run};
use hypodecay::propagate::geometric;
use hypodecay::spectral::*;

fn heat_ladder() -> DyadicLadder {
    let grid = GridConfig::new(1, 65536, 2048.0).unwrap();
    make_ladder(grid, -2, -10, 1).unwrap()
}

fn small() -> (GridConfig, DyadicLadder) {
    let grid = GridConfig::new(2, 64, 4.0).unwrap();
    (grid, make_ladder(grid, 0, -1, 0).unwrap())
}

#[test]
fn lacunary_data_has_no_two_sided_rate() {
    let ladder = heat_ladder();
    let out = heat_run(&ladder, SynthMode::Lacunary { gap: 4, top: -1 }, -0.5, 1, 0.05, "lacunary").unwrap();
    let r = &out.report.reports[0];
    assert!(!r.passed());
    assert!(r.envelope_ratio() > DEFAULT_RATIO_CAP, "ratio {}", r.envelope_ratio());
}

#[test]
fn log_periodic_series_passes_slope_but_fails_envelope() {
    let times = geometric(1.0, 4000.0, 400);
    let values = times
        .iter()
        .map(|t| t.powf(-0.75) * (0.9 * (std::f64::consts::TAU * t.log2()).sin()).exp())
        .collect();
    let s = NormSeries::new("oscillating", times, values).unwrap();
    let r = two_sided_check(&s, -0.75, (10.0, 2000.0), DEFAULT_TOL, DEFAULT_RATIO_CAP).unwrap();
    assert!((r.fitted_rate + 0.75).abs() <= DEFAULT_TOL, "slope {}", r.fitted_rate);
    let ratio = r.envelope_ratio();
    assert!((ratio - 1.8f64.exp()).abs() < 0.05 * ratio, "ratio {ratio}");
    assert!(matches!(r.verdict, Verdict::Fail { .. }));
}

#[test]
fn static_trajectory_has_flat_energy_and_linear_dissipation() {
    let (grid, ladder) = small();
    let a = synth_with_cutoff(grid, -1.0, 2.0, 3, SynthMode::Radial, 2.0).unwrap();
    let b = synth_with_cutoff(grid, -0.5, 2.0, 4, SynthMode::Radial, 2.0).unwrap();
    let f = a.concat(&b);
    let times: Vec<f64> = (0..24).map(|k| 0.5 * k as f64).collect();
    let traj = vec![f; times.len()];
    let cl = chemin_lerner_norms(&times, &traj, &ladder, 2.0, 1).unwrap();
    assert!(cl.e_tilde.iter().all(|e| (e / cl.e_tilde[0] - 1.0).abs() < 1e-14));
    assert_eq!(cl.growth(), 1.0);
    assert_eq!(cl.d_norm[0], 0.0);
    let per_unit = cl.d_norm[1] / times[1];
    for (t, dn) in times.iter().zip(&cl.d_norm).skip(1) {
        assert!((dn / t - per_unit).abs() <= 1e-12 * per_unit);
    }
}

#[test]
fn decaying_trajectory_keeps_initial_energy() {
    let (grid, ladder) = small();
    let f = synth_with_cutoff(grid, -1.0, 2.0, 5, SynthMode::Radial, 2.0).unwrap();
    let f = f.concat(&f);
    let times: Vec<f64> = (0..30).map(|k| 0.1 * k as f64).collect();
    let traj: Vec<_> = times.iter().map(|t| f.scaled((-t).exp())).collect();
    let cl = chemin_lerner_norms(&times, &traj, &ladder, 2.0, 1).unwrap();
    assert!(cl.e_tilde.iter().all(|e| (e - cl.e_tilde[0]).abs() <= 1e-14 * cl.e_tilde[0]));
    // Every block integral is (1 − e^{−T}) times its initial value, up to trapezoid error.
    let last = times.len() - 1;
    let rate = cl.d_norm[1] / (0.5 * times[1] * (1.0 + (-times[1]).exp()));
    let expected = rate * (1.0 - (-times[last]).exp());
    assert!((cl.d_norm[last] / expected - 1.0).abs() < 1e-3);
}

#[test]
fn sparse_or_unordered_trajectories_are_rejected() {
    let (grid, ladder) = small();
    let f = SpectralField::zeros(grid, 2);
    let times: Vec<f64> = (0..5).map(f64::from).collect();
    assert!(matches!(
        chemin_lerner_norms(&times, &vec![f.clone(); 5], &ladder, 2.0, 1),
        Err(AnalyzeError::SparseTrajectory(5))
    ));
    let mut acc = CheminLernerAccumulator::new(&ladder, 2.0, 1);
    acc.push(1.0, &f).unwrap();
    assert!(matches!(acc.push(1.0, &f), Err(AnalyzeError::MismatchedTimes)));
}

#[test]
fn report_json_round_trips() {
    let out = experiments::heat_character_1d(1).unwrap();
    let back = ExperimentReport::from_json(&out.report.to_json()).unwrap();
    assert_eq!(back, out.report);
    assert!(out.report.to_json().contains("\"C_upper\""));
}
