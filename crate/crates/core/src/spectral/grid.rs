use super::SpectralError;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Periodic grid on `[0, 2π·box_scale)^d` with `n` points per axis.
///
/// Resolved frequencies are `ξ = k / box_scale`. Modes are stored row-major with the
/// last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    pub box_scale: f64,
}

impl GridConfig {
    pub fn new(d: usize, n: usize, box_scale: f64) -> Result<Self, SpectralError> {
        if !(1..=3).contains(&d) {
            return Err(SpectralError::InvalidGrid(format!("d = {d} not in 1..=3")));
        }
        if n < 64 || !n.is_power_of_two() {
            return Err(SpectralError::InvalidGrid(format!("N = {n} must be a power of two ≥ 64")));
        }
        if !(box_scale >= 1.0) || !box_scale.is_finite() {
            return Err(SpectralError::InvalidGrid(format!("L_box = {box_scale} must be ≥ 1")));
        }
        Ok(Self { d, n, box_scale })
    }

    /// Number of modes, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (2.0 * self.box_scale)
    }

    /// Smallest nonzero frequency, `1/L_box`.
    pub fn fundamental(&self) -> f64 {
        1.0 / self.box_scale
    }

    /// Volume of the torus, `(2πL)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI * self.box_scale).powi(self.d as i32)
    }

    /// Signed integer wavenumber of axis index `i`; the Nyquist index maps to `−N/2`.
    pub fn signed(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    fn axis_indices(&self, flat: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut r = flat;
        for a in (0..self.d).rev() {
            out[a] = r % self.n;
            r /= self.n;
        }
        out
    }

    /// Signed wavevector `k` of a flat index.
    pub fn wavevector(&self, flat: usize) -> [i64; 3] {
        let idx = self.axis_indices(flat);
        let mut k = [0; 3];
        for a in 0..self.d {
            k[a] = self.signed(idx[a]);
        }
        k
    }

    /// True if any axis sits at the Nyquist index `N/2`.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let idx = self.axis_indices(flat);
        (0..self.d).any(|a| idx[a] == self.n / 2)
    }

    /// Physical frequency `ξ = k/L`, with Nyquist components set to zero so that odd
    /// multipliers stay real-representing.
    pub fn xi(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let mut xi = [0.0; 3];
        for a in 0..self.d {
            if idx[a] != self.n / 2 {
                xi[a] = self.signed(idx[a]) as f64 / self.box_scale;
            }
        }
        xi
    }

    pub fn xi_norm(&self, flat: usize) -> f64 {
        let x = self.xi(flat);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Flat index of `−k`.
    pub fn partner(&self, flat: usize) -> usize {
        let idx = self.axis_indices(flat);
        let mut out = 0;
        for a in 0..self.d {
            out = out * self.n + (self.n - idx[a]) % self.n;
        }
        out
    }

    /// Flat index of a signed wavevector (components reduced mod N).
    pub fn flat_of(&self, k: &[i64]) -> usize {
        let n = self.n as i64;
        let mut out = 0usize;
        for a in 0..self.d {
            out = out * self.n + k[a].rem_euclid(n) as usize;
        }
        out
    }

    /// Largest `|k_i|` over axes.
    pub fn max_abs_index(&self, flat: usize) -> i64 {
        let k = self.wavevector(flat);
        (0..self.d).map(|a| k[a].abs()).max().unwrap_or(0)
    }

    /// Grid with `factor` times as many points per axis and the same box.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            d: self.d,
            n: self.n * factor,
            box_scale: self.box_scale,
        }
    }
}

/// Strided lines transformed together in the non-contiguous passes.
const COLUMN_BATCH: usize = 32;

/// In-place multidimensional FFT on a grid.
///
/// `forward` maps samples to coefficients with `u(x) = Σ c_k e^{ik·x/L}` (scaled by `1/N^d`);
/// `inverse` evaluates the sum.
#[derive(Clone)]
pub struct FftNd {
    grid: GridConfig,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("grid", &self.grid).finish()
    }
}

impl FftNd {
    pub fn new(grid: GridConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fwd: planner.plan_fft_forward(grid.n),
            inv: planner.plan_fft_inverse(grid.n),
        }
    }

    pub fn grid(&self) -> GridConfig {
        self.grid
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let d = self.grid.d;
        assert_eq!(data.len(), self.grid.len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // Last axis is contiguous.
        for line in data.chunks_exact_mut(n) {
            plan.process_with_scratch(line, &mut scratch);
        }
        // Other axes: gather up to COLUMN_BATCH adjacent strided lines at once so each read
        // touches contiguous memory.
        let mut buf = vec![Complex64::new(0.0, 0.0); n * COLUMN_BATCH];
        for axis in 0..d.saturating_sub(1) {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for off in (0..stride).step_by(COLUMN_BATCH) {
                    let width = COLUMN_BATCH.min(stride - off);
                    let lines = &mut buf[..n * width];
                    for m in 0..n {
                        let row = base + m * stride + off;
                        for (b, z) in data[row..row + width].iter().enumerate() {
                            lines[b * n + m] = *z;
                        }
                    }
                    plan.process_with_scratch(lines, &mut scratch);
                    for m in 0..n {
                        let row = base + m * stride + off;
                        for (b, z) in data[row..row + width].iter_mut().enumerate() {
                            *z = lines[b * n + m];
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
        let s = 1.0 / self.grid.len() as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
    }
}

/// Copies coefficients of `src` grid into a zero-padded array on `dst` (same box, more points).
pub fn pad_coefficients(src: &GridConfig, coeffs: &[Complex64], dst: &GridConfig) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); dst.len()];
    for (flat, &c) in coeffs.iter().enumerate() {
        if c == Complex64::new(0.0, 0.0) || src.is_nyquist(flat) {
            continue;
        }
        let k = src.wavevector(flat);
        out[dst.flat_of(&k)] = c;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_round_trip_2d() {
        let g = GridConfig::new(2, 64, 3.0).unwrap();
        let f = FftNd::new(g);
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut a = orig.clone();
        f.forward(&mut a);
        f.inverse(&mut a);
        let err = a.iter().zip(&orig).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn forward_of_plane_wave_is_unit_coefficient() {
        let g = GridConfig::new(2, 64, 2.0).unwrap();
        let f = FftNd::new(g);
        let k = [3i64, -5];
        let mut a: Vec<Complex64> = (0..g.len())
            .map(|flat| {
                let (i, j) = (flat / g.n, flat % g.n);
                let phase = 2.0 * PI * (k[0] * i as i64 + k[1] * j as i64) as f64 / g.n as f64;
                Complex64::from_polar(1.0, phase)
            })
            .collect();
        f.forward(&mut a);
        let target = g.flat_of(&k);
        for (flat, c) in a.iter().enumerate() {
            let want = if flat == target { 1.0 } else { 0.0 };
            assert!((c - want).norm() < 1e-12);
        }
    }

    #[test]
    fn partner_and_wavevectors() {
        let g = GridConfig::new(3, 64, 1.0).unwrap();
        let flat = g.flat_of(&[1, -2, 30]);
        assert_eq!(g.wavevector(flat), [1, -2, 30]);
        assert_eq!(g.wavevector(g.partner(flat)), [-1, 2, -30]);
        assert!(g.is_nyquist(g.flat_of(&[0, 32, 1])));
        assert_eq!(g.xi(g.flat_of(&[0, 32, 1]))[1], 0.0);
    }

    #[test]
    fn grid_validation() {
        assert!(GridConfig::new(1, 32, 1.0).is_err());
        assert!(GridConfig::new(1, 100, 1.0).is_err());
        assert!(GridConfig::new(1, 64, 0.5).is_err());
        assert!(GridConfig::new(4, 64, 1.0).is_err());
    }
}
