use hypodecay::spectral::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn grid1() -> GridConfig {
    GridConfig::new(1, 4096, 256.0).unwrap()
}

#[test]
fn partition_of_unity_on_covered_interval() {
    for (g, j0, lo, hi) in [
        (grid1(), -2, -7, 1),
        (GridConfig::new(2, 256, 32.0).unwrap(), -1, -4, 0),
    ] {
        let l = make_ladder(g, j0, lo, hi).unwrap();
        let (a, b) = l.unity_interval();
        let mut worst = 0.0f64;
        let mut checked = 0;
        for flat in 0..g.len() {
            let rho = g.xi_norm(flat);
            if rho >= a && rho <= b {
                let s: f64 = l.blocks().map(|j| l.weight(flat, j)).sum();
                worst = worst.max((s - 1.0).abs());
                checked += 1;
            }
        }
        assert!(checked > 100);
        assert!(worst <= 1e-12, "partition defect {worst:e}");
    }
}

#[test]
fn block_is_identity_on_inner_shell() {
    let g = GridConfig::new(1, 1024, 64.0).unwrap();
    let l = make_ladder(g, -2, -5, 1).unwrap();
    let f = shell_field(g, 0, 9);
    assert!(f.coeffs.iter().any(|z| z.norm() > 0.0));
    assert_eq!(block(&f, &l, 0).unwrap(), f);
    for j in [-5, -4, -3, -2] {
        assert!(block(&f, &l, j).unwrap().coeffs.iter().all(|z| z.norm() == 0.0));
    }
    // Neighbours vanish too: φ_{±1} = 0 where φ_0 = 1.
    for j in [-1, 1] {
        assert!(block(&f, &l, j).unwrap().coeffs.iter().all(|z| z.norm() == 0.0));
    }
}

#[test]
fn block_of_constant_is_zero() {
    let g = grid1();
    let l = make_ladder(g, -2, -7, 1).unwrap();
    let mut f = SpectralField::zeros(g, 1);
    f.component_mut(0)[0] = Complex64::new(3.0, 0.0);
    for j in l.blocks() {
        assert!(block(&f, &l, j).unwrap().coeffs.iter().all(|z| z.norm() == 0.0));
    }
}

#[test]
fn block_twice_multiplies_by_phi_squared() {
    let g = grid1();
    let l = make_ladder(g, -2, -7, 1).unwrap();
    let f = synth_decay_character(g, -0.5, 2.0, 4, SynthMode::Radial).unwrap();
    let twice = block(&block(&f, &l, -3).unwrap(), &l, -3).unwrap();
    for flat in 0..g.len() {
        let w = l.weight(flat, -3);
        let want = f.component(0)[flat] * w * w;
        assert!((twice.component(0)[flat] - want).norm() <= 1e-15 * want.norm().max(1e-300));
    }
}

#[test]
fn almost_orthogonality() {
    let g = grid1();
    let l = make_ladder(g, -2, -7, 1).unwrap();
    let f = synth_decay_character(g, -0.5, 2.0, 4, SynthMode::Radial).unwrap();
    for j in l.blocks() {
        for k in l.blocks().filter(|k| (k - j).abs() >= 2) {
            let a = block(&f, &l, j).unwrap();
            let b = block(&f, &l, k).unwrap();
            let overlap: f64 = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x * y.conj()).norm()).sum();
            assert_eq!(overlap, 0.0);
        }
    }
}

#[test]
fn plancherel_matches_quadrature() {
    for (g, seed) in [(GridConfig::new(1, 512, 16.0).unwrap(), 1), (GridConfig::new(2, 64, 4.0).unwrap(), 2)] {
        let f = synth_decay_character(g, -0.25, 2.0, seed, SynthMode::Radial).unwrap();
        let a = plancherel_norm(&f);
        let b = lp_norm_quadrature(&f, 2.0, 1);
        assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
    }
}

#[test]
fn bernstein_two_sided_on_annulus() {
    // ‖∇f‖ / ‖f‖ lies in [3/4·2^j, 8/3·2^j] for f supported in block j.
    let g = GridConfig::new(2, 128, 16.0).unwrap();
    for j in [-2, -1, 0] {
        let f = block_field(g, j, 1, 7);
        let grad: Vec<Vec<Complex64>> = (0..2)
            .map(|a| {
                (0..g.len())
                    .map(|flat| f.component(0)[flat] * Complex64::new(0.0, g.xi(flat)[a]))
                    .collect()
            })
            .collect();
        let df = SpectralField::from_components(g, grad).unwrap();
        let ratio = lp_norm(&df, 2.0) / lp_norm(&f, 2.0) / 2f64.powi(j);
        assert!(ratio <= 8.0 / 3.0 * (1.0 + 1e-6) && ratio >= 0.75 * (1.0 - 1e-6), "j={j} ratio={ratio}");
    }
}

#[test]
fn bernstein_monochromatic_any_p() {
    // cos(ξ₀x) has ‖∂f‖_p = ξ₀‖f‖_p for every p.
    let g = GridConfig::new(1, 256, 8.0).unwrap();
    let k = 10i64;
    let mut f = SpectralField::zeros(g, 1);
    f.component_mut(0)[g.flat_of(&[k])] = Complex64::new(0.5, 0.0);
    f.component_mut(0)[g.flat_of(&[-k])] = Complex64::new(0.5, 0.0);
    let df = f.map_modes(|_| 1.0);
    let mut dfc = df.clone();
    for flat in 0..g.len() {
        dfc.component_mut(0)[flat] *= Complex64::new(0.0, g.xi(flat)[0]);
    }
    for p in [1.5, 3.0, 4.0] {
        let ratio = lp_norm(&dfc, p) / lp_norm(&f, p);
        assert!((ratio - k as f64 / 8.0).abs() < 1e-3 * ratio, "p={p} ratio={ratio}");
    }
}

#[test]
fn besov_sup_on_shell_field() {
    let g = GridConfig::new(1, 1024, 64.0).unwrap();
    let l = make_ladder(g, -2, -5, 1).unwrap();
    let f = shell_field(g, 0, 3);
    let f = f.scaled(1.0 / lp_norm(&f, 2.0));
    let v = besov_norm(&f, &l, &BesovSpec::new(0.0, 2.0, f64::INFINITY, Band::Full)).unwrap();
    // Brute force: the largest block norm among j ∈ {−1, 0, 1}.
    let brute = (-1..=1)
        .map(|j| lp_norm(&block(&f, &l, j).unwrap(), 2.0))
        .fold(0.0, f64::max);
    assert!((v - brute).abs() < 1e-14);
    assert!((1.0 / 3.0..=3.0).contains(&v));
}

#[test]
fn besov_is_homogeneous() {
    let g = grid1();
    let l = make_ladder(g, -2, -7, 1).unwrap();
    let f = synth_decay_character(g, -0.5, 2.0, 8, SynthMode::Radial).unwrap();
    for spec in [
        BesovSpec::new(1.0, 2.0, 1.0, Band::Full),
        BesovSpec::new(0.0, 3.0, 2.0, Band::Low),
        BesovSpec::hybrid(-0.5, 1.5, 2.0),
    ] {
        let a = besov_norm(&f, &l, &spec).unwrap();
        let b = besov_norm(&f.scaled(7.5), &l, &spec).unwrap();
        assert!((b - 7.5 * a).abs() <= 1e-13 * b);
    }
}

#[test]
fn band_split_identity() {
    // Low (j ≤ J0) and high (j ≥ J0−1) share blocks J0−1 and J0; with r = 1 the full norm is
    // low + high minus that overlap.
    let g = grid1();
    let l = make_ladder(g, -2, -7, 1).unwrap();
    let f = synth_decay_character(g, -0.5, 2.0, 8, SynthMode::Radial).unwrap();
    let s = 0.5;
    let full = besov_norm(&f, &l, &BesovSpec::new(s, 2.0, 1.0, Band::Full)).unwrap();
    let low = besov_norm(&f, &l, &BesovSpec::new(s, 2.0, 1.0, Band::Low)).unwrap();
    let high = besov_norm(&f, &l, &BesovSpec::new(s, 2.0, 1.0, Band::High)).unwrap();
    let bn = block_norms(&f, &l, 2.0);
    let overlap = aggregate(&bn, s, 1.0, l.j0 - 1, l.j0);
    assert!((full - (low + high - overlap)).abs() <= 1e-13 * full);
    assert!(full <= low + high);
}

#[test]
fn band_out_of_range() {
    let g = grid1();
    let mut l = make_ladder(g, -2, -7, 1).unwrap();
    l.j0 = -7;
    let f = SpectralField::zeros(g, 1);
    assert!(matches!(
        besov_norm(&f, &l, &BesovSpec::new(0.0, 2.0, 1.0, Band::High)),
        Err(SpectralError::BandOutOfRange(_))
    ));
}

#[test]
fn synth_radial_block_norms_scale_like_two_to_minus_sigma_j() {
    // d=2, σ₁=−1 gives a = 0: ‖Δ̇_j f‖² ≈ (2πL)²·L²·∫φ_j² dξ ∝ 2^{2j}.
    let l = default_ladder(2).unwrap();
    let f = synth_decay_character(l.grid, -1.0, 2.0, 1, SynthMode::Radial).unwrap();
    let c = estimate_decay_character(&f, &l, 2.0).unwrap();
    assert!((c.sigma1_hat + 1.0).abs() <= 0.05, "{c:?}");
    assert_eq!(c.gap_m, 1);
    let l = default_ladder(1).unwrap();
    let f = synth_decay_character(l.grid, -0.5, 2.0, 1, SynthMode::Radial).unwrap();
    let c = estimate_decay_character(&f, &l, 2.0).unwrap();
    assert!((c.sigma1_hat + 0.5).abs() <= 0.05, "{c:?}");
}

#[test]
fn synth_round_trip_over_sigma_range() {
    for d in [1usize, 2] {
        let l = default_ladder(d).unwrap();
        let half = d as f64 / 2.0;
        for sigma in [-half, -half + 0.5, 0.0] {
            let f = synth_decay_character(l.grid, sigma, 2.0, 5, SynthMode::Radial).unwrap();
            let c = estimate_decay_character(&f, &l, 2.0).unwrap();
            assert!((c.sigma1_hat - sigma).abs() <= 0.05, "d={d} σ₁={sigma}: {c:?}");
        }
    }
}

#[test]
fn lacunary_round_trip_reports_gap() {
    let g = GridConfig::new(1, 16384, 4096.0).unwrap();
    let l = make_ladder(g, -2, -11, -1).unwrap();
    let f = synth_decay_character(g, -1.0, 2.0, 2, SynthMode::Lacunary { gap: 2, top: -2 }).unwrap();
    let c = estimate_decay_character(&f, &l, 2.0).unwrap();
    assert!((c.sigma1_hat + 1.0).abs() < 1e-10, "{c:?}");
    assert_eq!(c.gap_m, 2);
    assert_eq!(c.blocks, vec![-10, -8, -6, -4, -2]);
}

#[test]
fn high_frequency_addition_leaves_estimate_unchanged() {
    let l = default_ladder(1).unwrap();
    let f = synth_decay_character(l.grid, -0.5, 2.0, 1, SynthMode::Radial).unwrap();
    let g = shell_field(l.grid, 1, 2).scaled(100.0);
    let a = estimate_decay_character(&f, &l, 2.0).unwrap();
    let b = estimate_decay_character(&f.add(&g).unwrap(), &l, 2.0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn block_norm_csv_is_deterministic() {
    let l = default_ladder(1).unwrap();
    let f = synth_decay_character(l.grid, -0.5, 2.0, 1, SynthMode::Radial).unwrap();
    let a = block_norms(&f, &l, 2.0).to_csv(1.0);
    let b = block_norms(&f, &l, 2.0).to_csv(1.0);
    assert_eq!(a, b);
    assert!(a.starts_with("j,block_norm,weighted\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_of_unity_at_random_radii(u in 0.0f64..1.0, lo in -8i32..-2, span in 2i32..8) {
        let hi = lo + span;
        let a = 4.0 / 3.0 * 2f64.powi(lo);
        let b = 1.5 * 2f64.powi(hi);
        let rho = a + u * (b - a);
        let s: f64 = (lo..=hi).map(|j| phi_j(rho, j)).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn phi_support(rho in 0.0f64..20.0, j in -4i32..3) {
        let v = phi_j(rho, j);
        let s = 2f64.powi(j);
        prop_assert!((0.0..=1.0).contains(&v));
        if rho <= 0.75 * s || rho >= 8.0 / 3.0 * s {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn fit_ignores_positive_rescaling(scale in 0.01f64..100.0) {
        let l = default_ladder(1).unwrap();
        let f = synth_decay_character(l.grid, -0.5, 2.0, 3, SynthMode::Radial).unwrap();
        let a = estimate_decay_character(&f, &l, 2.0).unwrap();
        let b = estimate_decay_character(&f.scaled(scale), &l, 2.0).unwrap();
        prop_assert!((a.sigma1_hat - b.sigma1_hat).abs() < 1e-12);
    }
}
