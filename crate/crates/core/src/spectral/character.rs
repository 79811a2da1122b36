use super::field::SpectralField;
use super::grid::GridConfig;
use super::ladder::{fit_j_min, phi_j, smooth_step, DyadicLadder};
use super::norms::{block_norms, lp_norm};
use super::SpectralError;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest admissible dynamic range `|a|·log₂(ξ_max/ξ_min)` of a radial spectrum `|ξ|^a`.
const MAX_LOG2_RANGE: f64 = 40.0;

/// Blocks below this fraction of the largest block norm are treated as empty.
const BLOCK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SynthMode {
    /// `f̂(ξ) = |ξ|^a θ(|ξ|) e^{iφ_k}` with `a = −σ₁ − d/2`.
    Radial,
    /// Energy only on the shells `4/3·2^{j_k} ≤ |ξ| ≤ 3/2·2^{j_k}`, `j_k = top − k·gap`.
    Lacunary { gap: u32, top: i32 },
}

/// Radial cutoff θ: 1 on `|ξ| ≤ 2c/3`, 0 on `|ξ| ≥ c`.
pub fn radial_cutoff(rho: f64, c: f64) -> f64 {
    smooth_step((rho - 2.0 * c / 3.0) / (c / 3.0))
}

/// Visits each `{k, −k}` pair once, skipping the zero mode and Nyquist planes.
fn for_each_pair(grid: &GridConfig, mut f: impl FnMut(usize, usize)) {
    for flat in 0..grid.len() {
        let p = grid.partner(flat);
        if p <= flat || grid.is_nyquist(flat) {
            continue;
        }
        f(flat, p);
    }
}

/// Synthesizes a real scalar field with decay character `sigma1`, radial cutoff at `|ξ| = 1`.
pub fn synth_decay_character(
    grid: GridConfig,
    sigma1: f64,
    p: f64,
    seed: u64,
    mode: SynthMode,
) -> Result<SpectralField, SpectralError> {
    synth_with_cutoff(grid, sigma1, p, seed, mode, 1.0)
}

/// As [`synth_decay_character`] with the radial cutoff radius `cutoff` instead of 1.
pub fn synth_with_cutoff(
    grid: GridConfig,
    sigma1: f64,
    p: f64,
    seed: u64,
    mode: SynthMode,
    cutoff: f64,
) -> Result<SpectralField, SpectralError> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(SpectralError::InvalidExponent(format!("p = {p} not in (1, ∞)")));
    }
    if !sigma1.is_finite() {
        return Err(SpectralError::UnresolvableSigma(sigma1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid, 1);
    match mode {
        SynthMode::Radial => {
            let a = -sigma1 - grid.d as f64 / 2.0;
            let hi = cutoff.min(grid.nyquist());
            if !(cutoff > 0.0) || a.abs() * (hi * grid.box_scale).log2() > MAX_LOG2_RANGE {
                return Err(SpectralError::UnresolvableSigma(sigma1));
            }
            let c = f.component_mut(0);
            for_each_pair(&grid, |flat, partner| {
                let phase = 2.0 * PI * rng.gen::<f64>();
                let rho = grid.xi_norm(flat);
                let amp = rho.powf(a) * radial_cutoff(rho, cutoff);
                let z = Complex64::from_polar(amp, phase);
                c[flat] = z;
                c[partner] = z.conj();
            });
        }
        SynthMode::Lacunary { gap, top } => {
            if gap == 0 {
                return Err(SpectralError::InvalidLadder("lacunary gap must be positive".into()));
            }
            if 1.5 * 2f64.powi(top) > grid.nyquist() {
                return Err(SpectralError::UnresolvedBlock(top));
            }
            let mut j = top;
            while 1.5 * 2f64.powi(j) >= grid.fundamental() {
                let lo = 4.0 / 3.0 * 2f64.powi(j);
                let hi = 1.5 * 2f64.powi(j);
                let mut shell = SpectralField::zeros(grid, 1);
                let mut any = false;
                {
                    let c = shell.component_mut(0);
                    for_each_pair(&grid, |flat, partner| {
                        let rho = grid.xi_norm(flat);
                        if rho >= lo && rho <= hi {
                            let z = Complex64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>());
                            c[flat] = z;
                            c[partner] = z.conj();
                            any = true;
                        }
                    });
                }
                if any {
                    let scale = 2f64.powf(-sigma1 * j as f64) / lp_norm(&shell, p);
                    for (dst, src) in f.coeffs.iter_mut().zip(&shell.coeffs) {
                        *dst += src * scale;
                    }
                }
                j -= gap as i32;
            }
        }
    }
    Ok(f)
}

/// Fitted decay character of a field from its low-frequency block norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCharacter {
    pub sigma1_hat: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub gap_m: i32,
    /// Blocks that entered the fit.
    pub blocks: Vec<i32>,
    pub fit_j_min: i32,
}

/// Least-squares slope of `log₂‖Δ̇_j f‖` against `j` over the low band, restricted to blocks with
/// `2^j ≥ 4/L_box` and a norm above the floor.
pub fn estimate_decay_character(
    field: &SpectralField,
    ladder: &DyadicLadder,
    p: f64,
) -> Result<DecayCharacter, SpectralError> {
    let norms = block_norms(field, ladder, p);
    let lo = ladder.j_min.max(fit_j_min(&field.grid));
    let hi = ladder.j0.min(ladder.j_max);
    let peak = (lo..=hi).map(|j| norms.get(j)).fold(0.0, f64::max);
    let pts: Vec<(i32, f64)> = (lo..=hi)
        .map(|j| (j, norms.get(j)))
        .filter(|&(_, b)| b > 0.0 && b > BLOCK_FLOOR * peak)
        .collect();
    if pts.len() < 5 {
        return Err(SpectralError::InsufficientBlocks(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|&(j, _)| j as f64).sum::<f64>() / n;
    let my = pts.iter().map(|&(_, b)| b.log2()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(j, b) in &pts {
        let dx = j as f64 - mx;
        sxy += dx * (b.log2() - my);
        sxx += dx * dx;
    }
    let sigma1_hat = -sxy / sxx;
    let env: Vec<f64> = pts.iter().map(|&(j, b)| 2f64.powf(sigma1_hat * j as f64) * b).collect();
    let c_lower = env.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_upper = env.iter().cloned().fold(0.0, f64::max);
    let above: Vec<i32> = pts
        .iter()
        .zip(&env)
        .filter(|(_, &e)| e > 0.5 * c_lower)
        .map(|(&(j, _), _)| j)
        .collect();
    let gap_m = above.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    Ok(DecayCharacter {
        sigma1_hat,
        c_lower,
        c_upper,
        gap_m,
        blocks: pts.iter().map(|&(j, _)| j).collect(),
        fit_j_min: lo,
    })
}

/// Fixture: unit-amplitude random-phase coefficients on `4/3·2^j ≤ |ξ| ≤ 3/2·2^j`, where
/// `φ_j = 1` and both neighbours vanish exactly.
pub fn shell_field(grid: GridConfig, j: i32, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid, 1);
    let c = f.component_mut(0);
    let (lo, hi) = (4.0 / 3.0 * 2f64.powi(j), 1.5 * 2f64.powi(j));
    for_each_pair(&grid, |flat, partner| {
        let rho = grid.xi_norm(flat);
        if rho >= lo && rho <= hi {
            let z = Complex64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>());
            c[flat] = z;
            c[partner] = z.conj();
        }
    });
    f
}

/// Fixture: random-phase data on the whole support of block `j`, weighted by `φ_j`.
pub fn block_field(grid: GridConfig, j: i32, n_comp: usize, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid, n_comp);
    let m = grid.len();
    for comp in 0..n_comp {
        let c = &mut f.coeffs[comp * m..(comp + 1) * m];
        for_each_pair(&grid, |flat, partner| {
            let w = phi_j(grid.xi_norm(flat), j);
            if w != 0.0 {
                let z = Complex64::from_polar(w, 2.0 * PI * rng.gen::<f64>());
                c[flat] = z;
                c[partner] = z.conj();
            }
        });
    }
    f
}

#[cfg(test)]
mod tests {
    use super::super::ladder::make_ladder;
    use super::*;

    #[test]
    fn radial_synth_is_real_with_zero_mean() {
        let g = GridConfig::new(2, 64, 8.0).unwrap();
        let f = synth_decay_character(g, -1.0, 2.0, 3, SynthMode::Radial).unwrap();
        assert!(f.hermitian_defect() < 1e-15);
        assert_eq!(f.component(0)[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn same_seed_same_field() {
        let g = GridConfig::new(1, 256, 16.0).unwrap();
        let a = synth_decay_character(g, -0.5, 2.0, 11, SynthMode::Radial).unwrap();
        let b = synth_decay_character(g, -0.5, 2.0, 11, SynthMode::Radial).unwrap();
        let c = synth_decay_character(g, -0.5, 2.0, 12, SynthMode::Radial).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn extreme_sigma_is_unresolvable() {
        let g = GridConfig::new(1, 4096, 256.0).unwrap();
        let e = synth_decay_character(g, 40.0, 2.0, 1, SynthMode::Radial).unwrap_err();
        assert_eq!(e, SpectralError::UnresolvableSigma(40.0));
    }

    #[test]
    fn single_block_field_has_insufficient_blocks() {
        let g = GridConfig::new(1, 4096, 256.0).unwrap();
        let l = make_ladder(g, -2, -7, 1).unwrap();
        let f = shell_field(g, -4, 5);
        assert_eq!(
            estimate_decay_character(&f, &l, 2.0).unwrap_err(),
            SpectralError::InsufficientBlocks(1)
        );
    }
}
