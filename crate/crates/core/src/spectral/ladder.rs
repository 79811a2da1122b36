use super::field::SpectralField;
use super::grid::GridConfig;
use super::SpectralError;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Inner and outer radii of the radial bump χ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiParams {
    pub inner: f64,
    pub outer: f64,
}

impl Default for ChiParams {
    fn default() -> Self {
        Self {
            inner: 0.75,
            outer: 4.0 / 3.0,
        }
    }
}

fn g(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 for `x ≤ 0`, 0 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    let a = g(1.0 - x);
    let b = g(x);
    a / (a + b)
}

/// χ(ρ): equal to 1 on `[0, 3/4]`, 0 on `[4/3, ∞)`.
pub fn chi(rho: f64) -> f64 {
    let p = ChiParams::default();
    smooth_step((rho - p.inner) / (p.outer - p.inner))
}

/// φ_j(ρ) = χ(ρ/2^{j+1}) − χ(ρ/2^j), supported in `[3/4·2^j, 8/3·2^j]`.
pub fn phi_j(rho: f64, j: i32) -> f64 {
    let s = 2f64.powi(j);
    chi(rho / (2.0 * s)) - chi(rho / s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ModeWeights {
    /// Lower of the (at most two) blocks containing the mode.
    j: i32,
    w: [f64; 2],
}

/// Littlewood–Paley ladder on a grid: blocks `j_min..=j_max` and the low/high threshold `j0`.
///
/// Every mode lies in at most two consecutive blocks, so the multiplier table stores one
/// block index and two weights per mode.
#[derive(Debug, Clone)]
pub struct DyadicLadder {
    pub grid: GridConfig,
    pub j_min: i32,
    pub j_max: i32,
    pub j0: i32,
    pub chi_params: ChiParams,
    table: Arc<Vec<ModeWeights>>,
}

impl PartialEq for DyadicLadder {
    fn eq(&self, o: &Self) -> bool {
        self.grid == o.grid && self.j_min == o.j_min && self.j_max == o.j_max && self.j0 == o.j0
    }
}

/// Block range and threshold in serializable form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSummary {
    pub j_min: i32,
    pub j_max: i32,
    pub j0: i32,
    /// Lowest block admitted into rate fits (`2^j ≥ 4/L_box`).
    pub fit_j_min: i32,
}

/// Builds the multiplier table after checking that every block is resolved by the grid.
pub fn make_ladder(grid: GridConfig, j0: i32, j_min: i32, j_max: i32) -> Result<DyadicLadder, SpectralError> {
    if j_min > j_max {
        return Err(SpectralError::InvalidLadder(format!("j_min = {j_min} > j_max = {j_max}")));
    }
    if 0.75 * 2f64.powi(j_min) < grid.fundamental() {
        return Err(SpectralError::UnresolvedBlock(j_min));
    }
    if 8.0 / 3.0 * 2f64.powi(j_max) > grid.nyquist() {
        return Err(SpectralError::UnresolvedBlock(j_max));
    }
    let table = (0..grid.len())
        .map(|flat| {
            let rho = grid.xi_norm(flat);
            if rho == 0.0 {
                return ModeWeights { j: i32::MIN, w: [0.0; 2] };
            }
            // Blocks with φ_j(ρ) ≠ 0 satisfy 3ρ/8 < 2^j < 4ρ/3.
            let lo = (3.0 * rho / 8.0).log2().floor() as i32;
            let j = (lo..=lo + 2).find(|&j| phi_j(rho, j) != 0.0).unwrap_or(lo);
            let mut w = [0.0; 2];
            for (slot, jj) in [j, j + 1].into_iter().enumerate() {
                if (j_min..=j_max).contains(&jj) {
                    w[slot] = phi_j(rho, jj);
                }
            }
            ModeWeights { j, w }
        })
        .collect();
    Ok(DyadicLadder {
        grid,
        j_min,
        j_max,
        j0,
        chi_params: ChiParams::default(),
        table: Arc::new(table),
    })
}

/// Smallest `j` with `2^j ≥ 4/L_box`.
pub fn fit_j_min(grid: &GridConfig) -> i32 {
    (4.0 / grid.box_scale).log2().ceil() as i32
}

impl DyadicLadder {
    pub fn blocks(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    pub fn n_blocks(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn contains(&self, j: i32) -> bool {
        (self.j_min..=self.j_max).contains(&j)
    }

    pub fn summary(&self) -> LadderSummary {
        LadderSummary {
            j_min: self.j_min,
            j_max: self.j_max,
            j0: self.j0,
            fit_j_min: fit_j_min(&self.grid),
        }
    }

    /// φ_j at a mode, zero outside the ladder.
    pub fn weight(&self, flat: usize, j: i32) -> f64 {
        let m = self.table[flat];
        if j == m.j {
            m.w[0]
        } else if m.j != i32::MIN && j == m.j + 1 {
            m.w[1]
        } else {
            0.0
        }
    }

    /// The (at most two) blocks touching a mode with their weights.
    pub fn weights(&self, flat: usize) -> [(i32, f64); 2] {
        let m = self.table[flat];
        [(m.j, m.w[0]), (m.j.saturating_add(1), m.w[1])]
    }

    /// `Σ_{j ≤ j0−1} φ_j` at a mode: the multiplier defining `u^ℓ`.
    pub fn low_pass(&self, flat: usize) -> f64 {
        self.weights(flat)
            .iter()
            .filter(|(j, _)| *j <= self.j0 - 1)
            .map(|(_, w)| w)
            .sum()
    }

    /// `Σ_j φ_j` at a mode.
    pub fn coverage(&self, flat: usize) -> f64 {
        let m = self.table[flat];
        m.w[0] + m.w[1]
    }

    /// Radii on which the partition of unity holds: `[4/3·2^{j_min}, 3/2·2^{j_max}]`.
    pub fn unity_interval(&self) -> (f64, f64) {
        (4.0 / 3.0 * 2f64.powi(self.j_min), 1.5 * 2f64.powi(self.j_max))
    }
}

/// `Δ̇_j f`: pointwise multiplication of the coefficients by φ_j.
pub fn block(field: &SpectralField, ladder: &DyadicLadder, j: i32) -> Result<SpectralField, SpectralError> {
    if !ladder.contains(j) {
        return Err(SpectralError::BlockOutOfRange(j));
    }
    Ok(field.map_modes(|flat| ladder.weight(flat, j)))
}

/// `u^ℓ = Σ_{j ≤ J0−1} Δ̇_j u`.
pub fn low_part(field: &SpectralField, ladder: &DyadicLadder) -> SpectralField {
    field.map_modes(|flat| ladder.low_pass(flat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_support_endpoints_are_exact_zeros() {
        assert_eq!(phi_j(0.75, 0), 0.0);
        assert_eq!(phi_j(8.0 / 3.0, 0), 0.0);
        assert!(phi_j(1.0, 0) > 0.0);
    }

    #[test]
    fn phi_is_one_on_inner_shell() {
        for rho in [4.0 / 3.0, 1.4, 1.5] {
            assert_eq!(phi_j(rho, 0), 1.0);
        }
    }

    #[test]
    fn chi_values() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(0.75), 1.0);
        assert_eq!(chi(4.0 / 3.0), 0.0);
        // Midpoint of the transition is exactly one half by symmetry.
        assert!((chi(0.75 + 0.5 * (4.0 / 3.0 - 0.75)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ladder_at_unit_radius_uses_blocks_minus_one_to_one() {
        let g = GridConfig::new(1, 4096, 256.0).unwrap();
        let l = make_ladder(g, -2, -7, 1).unwrap();
        let flat = g.flat_of(&[256]);
        let touching: Vec<i32> = l.blocks().filter(|&j| l.weight(flat, j) != 0.0).collect();
        assert!(touching.iter().all(|j| (-1..=1).contains(j)));
        let sum: f64 = l.blocks().map(|j| l.weight(flat, j)).sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unresolved_blocks_are_rejected() {
        let g = GridConfig::new(1, 4096, 256.0).unwrap();
        assert_eq!(make_ladder(g, -2, -10, 1).unwrap_err(), SpectralError::UnresolvedBlock(-10));
        assert_eq!(make_ladder(g, -2, -7, 4).unwrap_err(), SpectralError::UnresolvedBlock(4));
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let g = GridConfig::new(2, 64, 8.0).unwrap();
        let l = make_ladder(g, -1, -2, 0).unwrap();
        for flat in 0..g.len() {
            let rho = g.xi_norm(flat);
            for j in -2..=0 {
                assert_eq!(l.weight(flat, j), phi_j(rho, j));
            }
        }
    }
}
