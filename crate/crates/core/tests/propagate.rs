use hypodecay::linalg::{self, CMat};
use hypodecay::propagate::*;
use hypodecay::spectral::{block_field, lp_norm, synth_decay_character, GridConfig, SpectralField, SynthMode};
use hypodecay::system::fixtures;
use num_complex::Complex64;

fn slope(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len() as f64;
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn euler1d_data(grid: GridConfig, sigma1: f64, seed: u64) -> SpectralField {
    let a = synth_decay_character(grid, sigma1, 2.0, seed, SynthMode::Radial).unwrap();
    let m = synth_decay_character(grid, sigma1 + 1.0, 2.0, seed + 1, SynthMode::Radial).unwrap();
    a.concat(&m)
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    lp_norm(&a.sub(b).unwrap(), 2.0) / lp_norm(b, 2.0)
}

#[test]
fn zero_time_is_identity() {
    let g = GridConfig::new(2, 64, 8.0).unwrap();
    let sys = fixtures::euler2d();
    let f = block_field(g, -1, 3, 4);
    let out = evolve_linear(&sys, &f, &[0.0]).unwrap();
    let err = out[0].coeffs.iter().zip(&f.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err <= 1e-15, "max deviation {err:e}");
}

#[test]
fn grid_semigroup_and_hermitian_symmetry() {
    let g = GridConfig::new(2, 64, 4.0).unwrap();
    let sys = fixtures::euler2d();
    let f = block_field(g, 0, 3, 9);
    let prop = Propagator::new(&sys, g).unwrap();
    let direct = prop.evolve(&f, &[3.5]).unwrap().pop().unwrap();
    let mid = prop.evolve(&f, &[1.2]).unwrap().pop().unwrap();
    let composed = prop.evolve(&mid, &[2.3]).unwrap().pop().unwrap();
    assert!(rel(&composed, &direct) < 1e-10);
    assert!(direct.hermitian_defect() < 1e-13);
}

#[test]
fn conjugate_partner_modes_are_consistent() {
    let g = GridConfig::new(2, 64, 4.0).unwrap();
    let sys = fixtures::euler2d();
    let prop = Propagator::new(&sys, g).unwrap();
    for flat in [1usize, 65, 130, 777, 2049] {
        let xi = g.xi(flat);
        let direct = mode_exponential(&sys, &xi[..2], 0.9).unwrap();
        let cached = prop.mode_matrix(flat, 0.9).unwrap();
        assert!(linalg::norm_fro(&(direct - cached)) < 1e-11, "flat {flat}");
    }
}

#[test]
fn undamped_generator_conserves_l2() {
    let g = GridConfig::new(2, 64, 4.0).unwrap();
    let sys = fixtures::euler2d().without_dissipation();
    let f = block_field(g, 0, 3, 2);
    let n0 = lp_norm(&f, 2.0);
    for s in evolve_linear(&sys, &f, &[0.5, 5.0, 50.0]).unwrap() {
        assert!((lp_norm(&s, 2.0) / n0 - 1.0).abs() < 1e-11);
    }
}

#[test]
fn parabolic_semigroup_is_heat_for_euler1d() {
    let g = GridConfig::new(1, 128, 8.0).unwrap();
    let sys = fixtures::euler1d();
    let f = synth_decay_character(g, -0.5, 2.0, 1, SynthMode::Radial).unwrap();
    let t = 2.5;
    let out = parabolic_semigroup(&sys, &f, t).unwrap();
    for flat in 0..g.len() {
        let xi = g.xi(flat)[0];
        let want = f.coeffs[flat] * (-xi * xi * t).exp();
        assert!((out.coeffs[flat] - want).norm() < 1e-15);
    }
    let same = parabolic_semigroup(&sys, &f, 0.0).unwrap();
    assert_eq!(same.coeffs, f.coeffs);
}

#[test]
fn parabolic_semigroup_needs_ellipticity() {
    let g = GridConfig::new(1, 64, 8.0).unwrap();
    let f = SpectralField::zeros(g, 1);
    assert!(matches!(
        parabolic_semigroup(&fixtures::decoupled1d(), &f, 1.0),
        Err(PropagateError::NotElliptic(_))
    ));
}

#[test]
fn parabolic_annulus_rates_within_symbol_bounds() {
    // Euler 2D: symbol −|ξ|², ellipticity 1 in every direction.
    let g = GridConfig::new(2, 128, 32.0).unwrap();
    let sys = fixtures::euler2d();
    let j = -2;
    let psi0 = block_field(g, j, 1, 5);
    let lam2 = 4f64.powi(j);
    let times = geometric(0.1 / lam2, 5.0 / lam2, 20);
    let n0 = lp_norm(&psi0, 2.0);
    let vals: Vec<f64> = times
        .iter()
        .map(|&t| lp_norm(&parabolic_semigroup(&sys, &psi0, t).unwrap(), 2.0) / n0)
        .collect();
    let chord = (vals[0].ln() - vals.last().unwrap().ln()) / (times.last().unwrap() - times[0]) / lam2;
    assert!((0.5..=2.0 * (8.0f64 / 3.0).powi(2)).contains(&chord), "rate {chord}");
}

#[test]
fn effective_quantity_and_damped_mode_for_euler1d() {
    let g = GridConfig::new(1, 64, 4.0).unwrap();
    let sys = fixtures::euler1d();
    let f = block_field(g, 0, 2, 3);
    let psi = effective_quantity(&sys, &f).unwrap();
    let z = damped_mode(&sys, &f).unwrap();
    let m = g.len();
    for flat in 0..m {
        let xi = g.xi(flat)[0];
        let (a, mo) = (f.coeffs[flat], f.coeffs[m + flat]);
        let i = Complex64::new(0.0, 1.0);
        assert!((psi.coeffs[flat] - (a - i * xi * mo)).norm() < 1e-15);
        assert!((z.coeffs[flat] - (mo + i * xi * a)).norm() < 1e-15);
    }
    let only_v1 = f.select(0..1).concat(&SpectralField::zeros(g, 1));
    assert_eq!(effective_quantity(&sys, &only_v1).unwrap().coeffs, only_v1.select(0..1).coeffs);
}

#[test]
fn damped_mode_of_constant_is_v2() {
    let g = GridConfig::new(2, 64, 4.0).unwrap();
    let sys = fixtures::euler2d();
    let mut f = SpectralField::zeros(g, 3);
    f.set_mode(0, &[Complex64::new(0.7, 0.0), Complex64::new(-0.2, 0.0), Complex64::new(0.4, 0.0)]);
    let z = damped_mode(&sys, &f).unwrap();
    assert_eq!(z.coeffs, f.select(1..3).coeffs);
}

#[test]
fn chapman_profile_at_zero_time() {
    let g = GridConfig::new(1, 64, 4.0).unwrap();
    let sys = fixtures::euler1d();
    let psi0 = block_field(g, -1, 1, 8);
    let v = chapman_profile(&sys, &psi0, 0.0).unwrap();
    let m = g.len();
    for flat in 0..m {
        let xi = g.xi(flat)[0];
        assert_eq!(v.coeffs[flat], psi0.coeffs[flat]);
        let want = -Complex64::new(0.0, xi) * psi0.coeffs[flat];
        assert!((v.coeffs[m + flat] - want).norm() < 1e-15);
    }
}

#[test]
fn effective_quantity_approaches_parabolic_flow() {
    let g = GridConfig::new(1, 4096, 256.0).unwrap();
    let sys = fixtures::euler1d();
    let f0 = euler1d_data(g, -0.5, 21);
    let psi0 = effective_quantity(&sys, &f0).unwrap();
    let times = geometric(20.0, 1000.0, 12);
    let snaps = evolve_linear(&sys, &f0, &times).unwrap();
    let mut whole = vec![];
    let mut gap = vec![];
    let mut damped = vec![];
    let mut damped_gap = vec![];
    for (s, &t) in snaps.iter().zip(&times) {
        let psi = effective_quantity(&sys, s).unwrap();
        whole.push(lp_norm(&psi, 2.0));
        gap.push(lp_norm(&psi.sub(&parabolic_semigroup(&sys, &psi0, t).unwrap()).unwrap(), 2.0));
        let vstar = chapman_profile(&sys, &psi0, t).unwrap();
        damped.push(lp_norm(&s.select(1..2), 2.0));
        damped_gap.push(lp_norm(&s.sub(&vstar).unwrap().select(1..2), 2.0));
    }
    let (s_whole, s_gap) = (slope(&times, &whole), slope(&times, &gap));
    assert!(s_gap <= s_whole - 0.3, "Ψ slope {s_whole}, gap slope {s_gap}");
    let (s_d, s_dg) = (slope(&times, &damped), slope(&times, &damped_gap));
    assert!(s_dg <= s_d - 0.3, "V₂ slope {s_d}, V₂ − V₂* slope {s_dg}");
}

#[test]
fn diagonalization_identity_holds_on_block_data() {
    for (sys, g) in [
        (fixtures::euler1d(), GridConfig::new(1, 256, 64.0).unwrap()),
        (fixtures::euler2d(), GridConfig::new(2, 64, 16.0).unwrap()),
        (fixtures::toy_relaxation(2.0).unwrap(), GridConfig::new(1, 256, 64.0).unwrap()),
    ] {
        let f = block_field(g, -3, sys.n(), 17);
        let prop = Propagator::new(&sys, g).unwrap();
        for t in [0.5, 3.0, 20.0] {
            let r = diagonalization_residual(&prop, &f, t, 1e-4).unwrap();
            assert!(r < 1e-6, "{}: residual {r:e} at t = {t}", sys.name);
        }
    }
}

#[test]
fn annulus_envelope_brackets_reference_rate() {
    let g = GridConfig::new(1, 512, 2048.0).unwrap();
    let sys = fixtures::euler1d();
    let env = annulus_envelope(&sys, g, -5, 2.0, &[], 3).unwrap();
    for rate in [env.r_lower, env.r_upper] {
        let q = rate / env.reference_rate;
        assert!((0.5..=2.0).contains(&q), "rate ratio {q}");
    }
    assert!(env.r_lower >= env.r_upper);
    assert!(env.c0 <= 1.0 + 1e-12 && env.c0_upper >= 1.0);
    assert!(env.c1 <= 10.0, "V₂ envelope constant {}", env.c1);
    assert!(env.v2_ratio.1 / env.v2_ratio.0 <= 3.0, "V₂/λV₁ ratios {:?} {:?}", env.v2_ratio, env);
}

#[test]
fn annulus_envelope_is_amplitude_independent() {
    let g = GridConfig::new(1, 512, 2048.0).unwrap();
    let sys = fixtures::euler1d();
    let f = block_field(g, -5, 2, 5);
    let a = annulus_envelope_for(&sys, &f, -5, 2.0, &[]).unwrap();
    let b = annulus_envelope_for(&sys, &f.scaled(2.0), -5, 2.0, &[]).unwrap();
    assert!((a.r_lower - b.r_lower).abs() <= 1e-10 * a.r_lower);
    assert!((a.r_upper - b.r_upper).abs() <= 1e-10 * a.r_upper);
}

#[test]
fn annulus_above_lambda0_is_rejected() {
    let g = GridConfig::new(1, 256, 16.0).unwrap();
    let err = annulus_envelope(&fixtures::euler1d(), g, 0, 2.0, &[], 1).unwrap_err();
    assert!(matches!(err, PropagateError::RegimeViolation { j: 0, .. }));
}

#[test]
fn mode_exponential_solves_the_ode() {
    let sys = fixtures::euler2d();
    let xi = [0.2, -0.35];
    let (t, h) = (1.3, 1e-4);
    let e = sys.symbol(&xi);
    let g = |s: f64| mode_exponential(&sys, &xi, s).unwrap();
    let dg: CMat = (g(t - 2.0 * h) - g(t + 2.0 * h) + (g(t + h) - g(t - h)) * Complex64::new(8.0, 0.0))
        * Complex64::new(1.0 / (12.0 * h), 0.0);
    let resid = linalg::norm_fro(&(&dg - &e * g(t)));
    assert!(resid < 1e-9 * linalg::norm_fro(&dg), "{resid:e}");
}
