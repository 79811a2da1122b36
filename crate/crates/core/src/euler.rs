//! Damped compressible Euler: closed-form linear Green's function and a dealiased
//! pseudo-spectral solver for the nonlinear system in perturbation variables.
//!
//! Fields carry `(a, m)` with `a = ρ − ρ̄` and `m = ρu`. The normal-form system of
//! [`to_system_spec`] uses the scaled density `c*·a`; [`symmetrize`] converts between the two.

use crate::linalg::CMat;
use crate::spectral::{synth_with_cutoff, FftNd, GridConfig, SpectralError, SpectralField, SynthMode};
use crate::system::{fixtures, SystemSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use thiserror::Error;

type C64 = Complex64;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Below this `|r(ξ)|` the Green's function uses the Jordan-limit formula.
pub const JORDAN_RADIUS: f64 = 1e-6;
/// Quadrature points on the contour for φ-functions.
const CONTOUR_POINTS: usize = 64;
/// Steps between time-step recomputations.
const STEP_REFRESH: usize = 50;
/// Largest admissible `‖u‖_∞·k_max·h`.
const CFL_LIMIT: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EulerError {
    #[error("Green's function needs xi != 0")]
    ZeroFrequency,
    #[error("density fell to {min_rho} (< rho_bar/2) at t = {t}")]
    DensityFloorViolation { t: f64, min_rho: f64 },
    #[error("Courant number {courant} exceeds {CFL_LIMIT} at t = {t}")]
    CFLViolation { t: f64, courant: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("component mismatch: {0}")]
    ComponentMismatch(String),
    #[error("times must be nonnegative and increasing")]
    BadTimes,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Background state, pressure law `P(ρ) = K ρ^γ`, grid and perturbation size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerConfig {
    pub d: usize,
    pub rho_bar: f64,
    #[serde(rename = "K")]
    pub k_pressure: f64,
    pub gamma: f64,
    pub grid: GridConfig,
    pub epsilon: f64,
}

impl EulerConfig {
    /// `ρ̄ = 1`, `γ = 1.4`, `K = 1/1.4`, so that `c* = 1`.
    pub fn new(grid: GridConfig, epsilon: f64) -> Self {
        Self {
            d: grid.d,
            rho_bar: 1.0,
            k_pressure: 1.0 / 1.4,
            gamma: 1.4,
            grid,
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<(), EulerError> {
        let bad = |m: String| Err(EulerError::InvalidConfig(m));
        if !(1..=2).contains(&self.d) {
            return bad(format!("d = {} (supported: 1, 2)", self.d));
        }
        if self.grid.d != self.d {
            return bad(format!("grid has d = {}, config has d = {}", self.grid.d, self.d));
        }
        if !(self.rho_bar > 0.0) || !(self.k_pressure > 0.0) || !(self.gamma >= 1.0) {
            return bad("need rho_bar > 0, K > 0, gamma >= 1".into());
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon = {}", self.epsilon));
        }
        Ok(())
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.k_pressure * rho.powf(self.gamma)
    }

    /// `P′(ρ̄)`.
    pub fn c_star_sq(&self) -> f64 {
        self.k_pressure * self.gamma * self.rho_bar.powf(self.gamma - 1.0)
    }

    pub fn c_star(&self) -> f64 {
        self.c_star_sq().sqrt()
    }

    /// `P(ρ̄+a) − P(ρ̄) − P′(ρ̄)a`.
    ///
    /// Evaluated as `P(ρ̄)·(expm1(γ·ln1p(x)) − γx)` with `x = a/ρ̄`, which stays accurate
    /// when the remainder is far below `P(ρ̄)`.
    pub fn pressure_remainder(&self, a: f64) -> f64 {
        let x = a / self.rho_bar;
        self.pressure(self.rho_bar) * ((self.gamma * x.ln_1p()).exp_m1() - self.gamma * x)
    }
}

/// `Ĝ(ξ, t)` on `(â, m̂)`.
#[derive(Debug, Clone)]
pub struct GreenEval {
    pub xi: Vec<f64>,
    pub t: f64,
    pub g_hat: CMat,
}

/// Linear generator `[[0, −iξᵀ], [−c*²iξ, −I]]` on `(â, m̂)`.
pub fn linear_generator(c_star: f64, xi: &[f64]) -> CMat {
    let d = xi.len();
    let mut a = CMat::zeros(d + 1, d + 1);
    for i in 0..d {
        a[(0, i + 1)] = -I * xi[i];
        a[(i + 1, 0)] = -I * (c_star * c_star * xi[i]);
        a[(i + 1, i + 1)] = -ONE;
    }
    a
}

/// Green's function from the eigenprojector expansion `Σ e^{λ_k t} P_k`.
///
/// The longitudinal velocity block of `P₂` is `+½(1 + 1/r) ξ⊗ξ/|ξ|²`, so that `P₁+P₂+P₃ = I`.
pub fn green_oracle(c_star: f64, xi: &[f64], t: f64) -> Result<GreenEval, EulerError> {
    let d = xi.len();
    let k2: f64 = xi.iter().map(|x| x * x).sum();
    if k2 == 0.0 {
        return Err(EulerError::ZeroFrequency);
    }
    let c2 = c_star * c_star;
    let r = C64::new(1.0 - 4.0 * c2 * k2, 0.0).sqrt();
    let n = d + 1;
    // Orthogonal projector onto the transverse velocity directions.
    let mut p3 = CMat::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            p3[(i + 1, j + 1)] = C64::new(delta - xi[i] * xi[j] / k2, 0.0);
        }
    }
    let acoustic = CMat::identity(n, n) - &p3;
    let g_acoustic = if r.norm() < JORDAN_RADIUS {
        let nil = linear_generator(c_star, xi) + CMat::identity(n, n) * C64::new(0.5, 0.0);
        (&acoustic + nil * &acoustic * C64::new(t, 0.0)) * C64::new((-0.5 * t).exp(), 0.0)
    } else {
        let l1 = (r - 1.0) * 0.5;
        let l2 = (-r - 1.0) * 0.5;
        let mut p1 = CMat::zeros(n, n);
        let mut p2 = CMat::zeros(n, n);
        p1[(0, 0)] = (ONE + ONE / r) * 0.5;
        p2[(0, 0)] = (ONE - ONE / r) * 0.5;
        for i in 0..d {
            p1[(0, i + 1)] = -I * xi[i] / r;
            p2[(0, i + 1)] = I * xi[i] / r;
            p1[(i + 1, 0)] = -I * (c2 * xi[i]) / r;
            p2[(i + 1, 0)] = I * (c2 * xi[i]) / r;
            for j in 0..d {
                let pr = xi[i] * xi[j] / k2;
                p1[(i + 1, j + 1)] = (ONE - ONE / r) * (0.5 * pr);
                p2[(i + 1, j + 1)] = (ONE + ONE / r) * (0.5 * pr);
            }
        }
        p1 * (l1 * t).exp() + p2 * (l2 * t).exp()
    };
    let g_hat = g_acoustic + p3 * C64::new((-t).exp(), 0.0);
    Ok(GreenEval {
        xi: xi.to_vec(),
        t,
        g_hat,
    })
}

/// Normal-form matrices of the linearization in the scaled variables `(c*a, m)`.
pub fn to_system_spec(cfg: &EulerConfig) -> SystemSpec {
    fixtures::euler(cfg.d, cfg.c_star())
}

/// Multiplies the density component by `scale` (`c*` maps `(a, m)` to normal-form variables,
/// `1/c*` maps back).
pub fn symmetrize(field: &SpectralField, scale: f64) -> SpectralField {
    let mut out = field.clone();
    for z in out.component_mut(0) {
        *z *= scale;
    }
    out
}

/// `Ψ̂ = â − iξ·m̂`.
pub fn euler_effective(field: &SpectralField) -> Result<SpectralField, EulerError> {
    let d = field.grid.d;
    if field.n_comp != d + 1 {
        return Err(EulerError::ComponentMismatch(format!(
            "expected {} components, got {}",
            d + 1,
            field.n_comp
        )));
    }
    let m = field.modes();
    let mut out = field.select(0..1);
    for flat in 0..m {
        let xi = field.grid.xi(flat);
        let mut div = ZERO;
        for i in 0..d {
            div += I * xi[i] * field.coeffs[(i + 1) * m + flat];
        }
        out.coeffs[flat] -= div;
    }
    Ok(out)
}

/// Initial perturbation: `a₀` with decay character `σ₁` and `m₀` (per component) with `σ₁+1`,
/// scaled so that `max|a₀| = ερ̄` and `max|m₀,i| = ερ̄c*`, then truncated to the 2/3 band.
pub fn euler_initial_data(
    cfg: &EulerConfig,
    sigma1: f64,
    seed: u64,
    cutoff: f64,
) -> Result<SpectralField, EulerError> {
    cfg.validate()?;
    let grid = cfg.grid;
    let fft = FftNd::new(grid);
    let mut comps = Vec::with_capacity(cfg.d + 1);
    for c in 0..=cfg.d {
        let (sigma, target) = if c == 0 {
            (sigma1, cfg.epsilon * cfg.rho_bar)
        } else {
            (sigma1 + 1.0, cfg.epsilon * cfg.rho_bar * cfg.c_star())
        };
        let mut f = synth_with_cutoff(grid, sigma, 2.0, seed.wrapping_add(c as u64), SynthMode::Radial, cutoff)?;
        dealias(&grid, f.component_mut(0));
        let peak = f.to_physical(&fft)[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let s = if peak > 0.0 { target / peak } else { 0.0 };
        comps.push(f.scaled(s));
    }
    Ok(comps.iter().skip(1).fold(comps[0].clone(), |acc, f| acc.concat(f)))
}

/// Zeroes every mode with some `|k_i| > N/3`.
pub fn dealias(grid: &GridConfig, coeffs: &mut [C64]) {
    let cut = (grid.n / 3) as i64;
    for (flat, z) in coeffs.iter_mut().enumerate() {
        if grid.max_abs_index(flat) > cut {
            *z = ZERO;
        }
    }
}

/// Statistics of a nonlinear run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerRunStats {
    pub steps: usize,
    pub table_builds: usize,
    pub min_density: f64,
    pub max_courant: f64,
    pub final_step: f64,
}

/// Coefficients of one ETDRK4 step on the acoustic pair `(â, q = ξ̂·m̂)`.
///
/// `e`, `e2` are full 2×2 row-major propagators; the φ-functions only act on the `q` column
/// since the density equation has no nonlinearity.
#[derive(Debug, Clone, Copy)]
struct AcousticCoeffs {
    e: [C64; 4],
    e2: [C64; 4],
    q: [C64; 2],
    f1: [C64; 2],
    f2: [C64; 2],
    f3: [C64; 2],
}

/// Scalar coefficients for the purely damped directions (`z = −h`).
#[derive(Debug, Clone, Copy)]
struct DampedCoeffs {
    e: f64,
    e2: f64,
    q: f64,
    f1: f64,
    f2: f64,
    f3: f64,
}

#[derive(Clone, Copy)]
enum Phi {
    #[cfg(test)]
    Exp,
    Q,
    F1,
    F2,
    F3,
}

fn phi_eval(kind: Phi, z: C64, h: f64) -> C64 {
    let ez = z.exp();
    match kind {
        #[cfg(test)]
        Phi::Exp => ez,
        Phi::Q => ((z * 0.5).exp() - 1.0) / z * h,
        Phi::F1 => (-4.0 - z + ez * (4.0 - z * 3.0 + z * z)) / (z * z * z) * h,
        Phi::F2 => (2.0 + z + ez * (z - 2.0)) / (z * z * z) * h,
        Phi::F3 => (-4.0 - z * 3.0 - z * z + ez * (4.0 - z)) / (z * z * z) * h,
    }
}

/// `g(z₂)` and the divided difference `g[z₁, z₂]` by Cauchy integrals on a circle around both
/// points, which avoids the removable singularities at 0 and at `z₁ = z₂`.
fn contour_pair(kind: Phi, z1: C64, z2: C64, h: f64) -> (C64, C64) {
    let c = (z1 + z2) * 0.5;
    let radius = 1.0 + (z1 - z2).norm();
    let (mut g2, mut dd) = (ZERO, ZERO);
    for p in 0..CONTOUR_POINTS {
        let th = 2.0 * PI * (p as f64 + 0.5) / CONTOUR_POINTS as f64;
        let u = C64::from_polar(radius, th);
        let w = c + u;
        let g = phi_eval(kind, w, h) * u;
        g2 += g / (w - z2);
        dd += g / ((w - z1) * (w - z2));
    }
    let s = 1.0 / CONTOUR_POINTS as f64;
    (g2 * s, dd * s)
}

/// `g(hM)` for `M = [[0, −ik], [−c²ik, −1]]` as `g(z₂)I + g[z₁,z₂](hM − z₂I)`.
fn acoustic_function(kind: Phi, k: f64, c2: f64, h: f64) -> [C64; 4] {
    let hm = [ZERO, -I * (h * k), -I * (h * c2 * k), C64::new(-h, 0.0)];
    let disc = C64::new(1.0 - 4.0 * c2 * k * k, 0.0).sqrt();
    let z1 = (disc - 1.0) * (0.5 * h);
    let z2 = (-disc - 1.0) * (0.5 * h);
    let (g2, dd) = contour_pair(kind, z1, z2, h);
    [
        g2 + dd * (hm[0] - z2),
        dd * hm[1],
        dd * hm[2],
        g2 + dd * (hm[3] - z2),
    ]
}

fn acoustic_coeffs(k: f64, c_star: f64, h: f64) -> AcousticCoeffs {
    let c2 = c_star * c_star;
    let (e, e2) = if k > 0.0 {
        let g = green_oracle(c_star, &[k], h).expect("k > 0").g_hat;
        let g2 = green_oracle(c_star, &[k], 0.5 * h).expect("k > 0").g_hat;
        (
            [g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]],
            [g2[(0, 0)], g2[(0, 1)], g2[(1, 0)], g2[(1, 1)]],
        )
    } else {
        let e = C64::new((-h).exp(), 0.0);
        let e2 = C64::new((-0.5 * h).exp(), 0.0);
        ([ONE, ZERO, ZERO, e], [ONE, ZERO, ZERO, e2])
    };
    let col = |kind| {
        let g = acoustic_function(kind, k, c2, h);
        [g[1], g[3]]
    };
    AcousticCoeffs {
        e,
        e2,
        q: col(Phi::Q),
        f1: col(Phi::F1),
        f2: col(Phi::F2),
        f3: col(Phi::F3),
    }
}

fn damped_coeffs(h: f64) -> DampedCoeffs {
    let z = C64::new(-h, 0.0);
    let f = |kind| contour_pair(kind, z, z, h).0.re;
    DampedCoeffs {
        e: (-h).exp(),
        e2: (-0.5 * h).exp(),
        q: f(Phi::Q),
        f1: f(Phi::F1),
        f2: f(Phi::F2),
        f3: f(Phi::F3),
    }
}

/// Per-mode geometry of the retained (dealiased) modes.
struct ModeMap {
    flats: Vec<usize>,
    /// Unit direction `ξ/|ξ|` (zero at `ξ = 0`).
    xhat: Vec<[f64; 2]>,
    xi: Vec<[f64; 2]>,
    /// Index into the table of distinct `|ξ|`.
    shell: Vec<u32>,
    radii: Vec<f64>,
    k_max: f64,
}

impl ModeMap {
    fn new(grid: &GridConfig) -> Self {
        let cut = (grid.n / 3) as i64;
        let d = grid.d;
        let mut keys: HashMap<i64, u32> = HashMap::new();
        let mut radii = Vec::new();
        let (mut flats, mut xhat, mut xis, mut shell) = (vec![], vec![], vec![], vec![]);
        let mut k_max: f64 = 0.0;
        for flat in 0..grid.len() {
            if grid.max_abs_index(flat) > cut {
                continue;
            }
            let xi = grid.xi(flat);
            let k = grid.xi_norm(flat);
            k_max = k_max.max(k);
            let key = (k * k * grid.box_scale * grid.box_scale).round() as i64;
            let idx = *keys.entry(key).or_insert_with(|| {
                radii.push(k);
                (radii.len() - 1) as u32
            });
            let mut xh = [0.0; 2];
            let mut x2 = [0.0; 2];
            for i in 0..d {
                x2[i] = xi[i];
                if k > 0.0 {
                    xh[i] = xi[i] / k;
                }
            }
            flats.push(flat);
            xhat.push(xh);
            xis.push(x2);
            shell.push(idx);
        }
        Self {
            flats,
            xhat,
            xi: xis,
            shell,
            radii,
            k_max,
        }
    }
}

/// Spectral state `(â, m̂)` restricted to the retained modes, `[a, m₁, .., m_d]` per mode.
type State = Vec<[C64; 3]>;

struct Solver<'a> {
    cfg: &'a EulerConfig,
    fft: FftNd,
    map: ModeMap,
    h: f64,
    acoustic: Vec<AcousticCoeffs>,
    damped: DampedCoeffs,
    bufs: Vec<Vec<C64>>,
    stats: EulerRunStats,
}

impl<'a> Solver<'a> {
    fn new(cfg: &'a EulerConfig) -> Self {
        let grid = cfg.grid;
        let d = cfg.d;
        let n_buf = d + 1 + d * (d + 1) / 2;
        Self {
            cfg,
            fft: FftNd::new(grid),
            map: ModeMap::new(&grid),
            h: f64::NAN,
            acoustic: vec![],
            damped: damped_coeffs(1.0),
            bufs: vec![vec![ZERO; grid.len()]; n_buf],
            stats: EulerRunStats {
                min_density: f64::INFINITY,
                ..Default::default()
            },
        }
    }

    fn set_step(&mut self, h: f64) {
        if h == self.h {
            return;
        }
        self.h = h;
        let c = self.cfg.c_star();
        self.acoustic = self.map.radii.iter().map(|&k| acoustic_coeffs(k, c, h)).collect();
        self.damped = damped_coeffs(h);
        self.stats.table_builds += 1;
    }

    fn load(&self, field: &SpectralField) -> State {
        let m = field.modes();
        self.map
            .flats
            .iter()
            .map(|&flat| {
                let mut v = [ZERO; 3];
                for c in 0..field.n_comp {
                    v[c] = field.coeffs[c * m + flat];
                }
                v
            })
            .collect()
    }

    fn store(&self, state: &State) -> SpectralField {
        let grid = self.cfg.grid;
        let n_comp = self.cfg.d + 1;
        let mut out = SpectralField::zeros(grid, n_comp);
        let m = grid.len();
        for (v, &flat) in state.iter().zip(&self.map.flats) {
            for c in 0..n_comp {
                out.coeffs[c * m + flat] = v[c];
            }
        }
        out
    }

    /// Maximum of `|u|` over the grid for the given state, with the density floor check.
    fn velocity_max(&mut self, state: &State, t: f64) -> Result<f64, EulerError> {
        self.physical(state);
        let d = self.cfg.d;
        let mut umax: f64 = 0.0;
        let mut rmin = f64::INFINITY;
        for x in 0..self.cfg.grid.len() {
            let rho = self.cfg.rho_bar + self.bufs[0][x].re;
            rmin = rmin.min(rho);
            let m2: f64 = (0..d).map(|i| self.bufs[i + 1][x].re.powi(2)).sum();
            umax = umax.max(m2.sqrt() / rho);
        }
        self.check_density(rmin, t)?;
        Ok(umax)
    }

    fn check_density(&mut self, rmin: f64, t: f64) -> Result<(), EulerError> {
        self.stats.min_density = self.stats.min_density.min(rmin);
        if !(rmin >= 0.5 * self.cfg.rho_bar) {
            return Err(EulerError::DensityFloorViolation { t, min_rho: rmin });
        }
        Ok(())
    }

    /// Inverse transforms of `a` and `m` into `bufs[0..=d]`.
    fn physical(&mut self, state: &State) {
        let d = self.cfg.d;
        for c in 0..=d {
            let buf = &mut self.bufs[c];
            buf.iter_mut().for_each(|z| *z = ZERO);
            for (v, &flat) in state.iter().zip(&self.map.flats) {
                buf[flat] = v[c];
            }
            self.fft.inverse(buf);
        }
    }

    /// `N̂_m = −iξ_j F̂_ij` with `F_ij = m_i m_j/ρ + δ_ij Π`, dealiased.
    fn nonlinear(&mut self, state: &State, t: f64) -> Result<State, EulerError> {
        self.physical(state);
        let d = self.cfg.d;
        let mut rmin = f64::INFINITY;
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
        for x in 0..self.cfg.grid.len() {
            let a = self.bufs[0][x].re;
            let rho = self.cfg.rho_bar + a;
            rmin = rmin.min(rho);
            let pi = self.cfg.pressure_remainder(a);
            let mut mv = [0.0; 2];
            for i in 0..d {
                mv[i] = self.bufs[i + 1][x].re;
            }
            for (slot, &(i, j)) in pairs.iter().enumerate() {
                let mut f = mv[i] * mv[j] / rho;
                if i == j {
                    f += pi;
                }
                self.bufs[d + 1 + slot][x] = C64::new(f, 0.0);
            }
        }
        self.check_density(rmin, t)?;
        for slot in 0..pairs.len() {
            self.fft.forward(&mut self.bufs[d + 1 + slot]);
        }
        let flux = |i: usize, j: usize| {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            d + 1 + pairs.iter().position(|&p| p == (i, j)).unwrap()
        };
        let mut idx = [[0usize; 2]; 2];
        for i in 0..d {
            for j in 0..d {
                idx[i][j] = flux(i, j);
            }
        }
        let mut out = vec![[ZERO; 3]; state.len()];
        for (o, (&flat, xi)) in out.iter_mut().zip(self.map.flats.iter().zip(&self.map.xi)) {
            for i in 0..d {
                let mut acc = ZERO;
                for j in 0..d {
                    acc += self.bufs[idx[i][j]][flat] * xi[j];
                }
                o[i + 1] = -I * acc;
            }
        }
        Ok(out)
    }

    /// `L v` for `L ∈ {E, E2}` per mode.
    fn linear(&self, v: &State, half: bool, out: &mut State) {
        let d = self.cfg.d;
        let ed = if half { self.damped.e2 } else { self.damped.e };
        for (n, (o, x)) in out.iter_mut().zip(v).enumerate() {
            let ac = &self.acoustic[self.map.shell[n] as usize];
            let e = if half { &ac.e2 } else { &ac.e };
            let xh = &self.map.xhat[n];
            let q: C64 = (0..d).map(|i| x[i + 1] * xh[i]).sum();
            let a_new = e[0] * x[0] + e[1] * q;
            let q_new = e[2] * x[0] + e[3] * q;
            o[0] = a_new;
            for i in 0..d {
                let trans = x[i + 1] - q * xh[i];
                o[i + 1] = q_new * xh[i] + trans * ed;
            }
            if self.map.radii[self.map.shell[n] as usize] == 0.0 {
                for i in 0..d {
                    o[i + 1] = x[i + 1] * ed;
                }
            }
        }
    }

    /// `out += w·φ(hM)·N` for the chosen φ-function.
    fn add_phi(&self, kind: Phi, w: f64, nl: &State, out: &mut State) {
        let d = self.cfg.d;
        let dc = match kind {
            Phi::Q => self.damped.q,
            Phi::F1 => self.damped.f1,
            Phi::F2 => self.damped.f2,
            Phi::F3 => self.damped.f3,
            #[allow(unreachable_patterns)]
            _ => unreachable!("propagators are applied by `linear`"),
        };
        for (n, (o, x)) in out.iter_mut().zip(nl).enumerate() {
            let shell = self.map.shell[n] as usize;
            let ac = &self.acoustic[shell];
            let col = match kind {
                Phi::Q => &ac.q,
                Phi::F1 => &ac.f1,
                Phi::F2 => &ac.f2,
                _ => &ac.f3,
            };
            if self.map.radii[shell] == 0.0 {
                for i in 0..d {
                    o[i + 1] += x[i + 1] * (w * dc);
                }
                continue;
            }
            let xh = &self.map.xhat[n];
            let q: C64 = (0..d).map(|i| x[i + 1] * xh[i]).sum();
            o[0] += col[0] * q * w;
            let qn = col[1] * q * w;
            for i in 0..d {
                let trans = x[i + 1] - q * xh[i];
                o[i + 1] += qn * xh[i] + trans * (w * dc);
            }
        }
    }

    fn step(&mut self, v: &State, t: f64) -> Result<State, EulerError> {
        let n = v.len();
        let nv = self.nonlinear(v, t)?;
        let mut a = vec![[ZERO; 3]; n];
        self.linear(v, true, &mut a);
        let mut b = a.clone();
        self.add_phi(Phi::Q, 1.0, &nv, &mut a);
        let na = self.nonlinear(&a, t + 0.5 * self.h)?;
        self.add_phi(Phi::Q, 1.0, &na, &mut b);
        let nb = self.nonlinear(&b, t + 0.5 * self.h)?;
        let mut c = vec![[ZERO; 3]; n];
        self.linear(&a, true, &mut c);
        self.add_phi(Phi::Q, 2.0, &nb, &mut c);
        self.add_phi(Phi::Q, -1.0, &nv, &mut c);
        let nc = self.nonlinear(&c, t + self.h)?;
        let mut out = vec![[ZERO; 3]; n];
        self.linear(v, false, &mut out);
        self.add_phi(Phi::F1, 1.0, &nv, &mut out);
        self.add_phi(Phi::F2, 2.0, &na, &mut out);
        self.add_phi(Phi::F2, 2.0, &nb, &mut out);
        self.add_phi(Phi::F3, 1.0, &nc, &mut out);
        Ok(out)
    }

    fn max_step(&self, umax: f64) -> f64 {
        let k = self.map.k_max;
        0.4 / (self.cfg.c_star() * k + umax * k + 1.0)
    }
}

/// Runs the nonlinear solver, calling `visit(i, state)` at each `times[i]`.
pub fn evolve_euler_with(
    cfg: &EulerConfig,
    field0: &SpectralField,
    times: &[f64],
    mut visit: impl FnMut(usize, &SpectralField),
) -> Result<EulerRunStats, EulerError> {
    cfg.validate()?;
    if field0.grid != cfg.grid || field0.n_comp != cfg.d + 1 {
        return Err(EulerError::ComponentMismatch(format!(
            "field has {} components on {:?}",
            field0.n_comp, field0.grid
        )));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(EulerError::BadTimes);
    }
    let mut solver = Solver::new(cfg);
    let mut state = solver.load(field0);
    let mut t = 0.0;
    let mut since_refresh = STEP_REFRESH;
    let mut umax = 0.0;
    for (ti, &target) in times.iter().enumerate() {
        while target - t > 1e-12 * target.max(1.0) {
            if since_refresh >= STEP_REFRESH {
                umax = solver.velocity_max(&state, t)?;
                since_refresh = 0;
            }
            let remaining = target - t;
            let n_steps = (remaining / solver.max_step(umax)).ceil().max(1.0);
            let h = remaining / n_steps;
            solver.set_step(h);
            let courant = umax * solver.map.k_max * h;
            solver.stats.max_courant = solver.stats.max_courant.max(courant);
            if courant > CFL_LIMIT {
                return Err(EulerError::CFLViolation { t, courant });
            }
            let budget = (STEP_REFRESH - since_refresh).min(n_steps as usize);
            for s in 0..budget {
                state = solver.step(&state, t)?;
                t = if s + 1 == n_steps as usize { target } else { t + h };
                solver.stats.steps += 1;
            }
            since_refresh += budget;
        }
        t = target;
        visit(ti, &solver.store(&state));
    }
    solver.stats.final_step = solver.h;
    Ok(solver.stats)
}

/// Snapshots of the nonlinear evolution at the requested times.
pub fn evolve_euler_nonlinear(
    cfg: &EulerConfig,
    field0: &SpectralField,
    times: &[f64],
) -> Result<Vec<SpectralField>, EulerError> {
    let mut out = Vec::with_capacity(times.len());
    evolve_euler_with(cfg, field0, times, |_, f| out.push(f.clone()))?;
    Ok(out)
}
