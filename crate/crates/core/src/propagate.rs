//! Exact per-mode linear evolution `V̂(t,ξ) = exp(tE(ξ)) V̂₀(ξ)`, the parabolic semigroup
//! `e^{t𝒜}`, and the derived quantities Ψ, Z and V*.

use crate::linalg::{self, CMat};
use crate::spectral::{block_field, lp_norm, GridConfig, SpectralError, SpectralField};
use crate::system::{self, SystemError, SystemSpec, EPS_SK};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eigendecompositions with a larger eigenvector condition number fall back to Padé.
pub const COND_LIMIT: f64 = 1e6;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagateError {
    #[error("matrix exponential failed at xi = {xi:?}")]
    ExpmFailure { xi: Vec<f64> },
    #[error("diffusion operator is not strongly elliptic (min eigenvalue {0:e})")]
    NotElliptic(f64),
    #[error("block {j} (2^j = {scale}) lies above lambda0 = {lambda0}")]
    RegimeViolation { j: i32, scale: f64, lambda0: f64 },
    #[error("component mismatch: {0}")]
    ComponentMismatch(String),
    #[error("times must be nonnegative and increasing")]
    BadTimes,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// `exp(tE(ξ))` for one frequency, via eigendecomposition or Padé.
#[derive(Debug, Clone)]
pub enum ModeFactor {
    Eigen(linalg::Eigen),
    Pade(CMat),
}

impl ModeFactor {
    pub fn new(sys: &SystemSpec, xi: &[f64]) -> Result<Self, PropagateError> {
        let e = sys.symbol(xi);
        match linalg::eig(&e) {
            Some(eig) if eig.cond < COND_LIMIT => Ok(Self::Eigen(eig)),
            _ => Ok(Self::Pade(e)),
        }
    }

    pub fn exp(&self, t: f64, xi: &[f64]) -> Result<CMat, PropagateError> {
        match self {
            Self::Eigen(eig) => Ok(eig.apply_fn(|l| (l * t).exp())),
            Self::Pade(e) => linalg::expm(&(e * Complex64::new(t, 0.0)))
                .ok_or_else(|| PropagateError::ExpmFailure { xi: xi.to_vec() }),
        }
    }
}

/// `exp(tE(ξ))` at an arbitrary frequency through the same path as [`Propagator`].
pub fn mode_exponential(sys: &SystemSpec, xi: &[f64], t: f64) -> Result<CMat, PropagateError> {
    ModeFactor::new(sys, xi)?.exp(t, xi)
}

const KIND_EIGEN: u8 = 0;
const KIND_PADE: u8 = 1;
const CONJ_BIT: u32 = 1 << 31;

/// Per-mode factorization cache for a system on a grid.
///
/// Only one mode of each `{k, −k}` pair is factorized; its partner uses
/// `E(−ξ) = conj E(ξ)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub sys: SystemSpec,
    pub grid: GridConfig,
    slot_of: Vec<u32>,
    kind: Vec<u8>,
    data: Vec<Complex64>,
    n_pade: usize,
}

impl Propagator {
    /// Factorizes every mode, in parallel on the current rayon pool.
    pub fn new(sys: &SystemSpec, grid: GridConfig) -> Result<Self, PropagateError> {
        if sys.d != grid.d {
            return Err(PropagateError::ComponentMismatch(format!(
                "system has d = {}, grid has d = {}",
                sys.d, grid.d
            )));
        }
        let n = sys.n();
        let stride = n + 2 * n * n;
        let m = grid.len();
        let mut slot_of = vec![0u32; m];
        let mut owners = Vec::with_capacity(m / 2 + 2);
        for flat in 0..m {
            let partner = grid.partner(flat);
            if partner < flat {
                slot_of[flat] = slot_of[partner] | CONJ_BIT;
            } else {
                slot_of[flat] = owners.len() as u32;
                owners.push(flat);
            }
        }
        let factors = owners
            .par_iter()
            .map(|&flat| ModeFactor::new(sys, &grid.xi(flat)[..sys.d]))
            .collect::<Result<Vec<_>, _>>()?;
        let mut kind = Vec::with_capacity(owners.len());
        let mut data = Vec::with_capacity(owners.len() * stride);
        let mut n_pade = 0;
        for factor in factors {
            match factor {
                ModeFactor::Eigen(eig) => {
                    kind.push(KIND_EIGEN);
                    data.extend_from_slice(&eig.values);
                    push_row_major(&mut data, &eig.vectors);
                    push_row_major(&mut data, &eig.inverse);
                }
                ModeFactor::Pade(e) => {
                    kind.push(KIND_PADE);
                    n_pade += 1;
                    push_row_major(&mut data, &e);
                    data.extend(std::iter::repeat(ZERO).take(stride - n * n));
                }
            }
        }
        Ok(Self {
            sys: sys.clone(),
            grid,
            slot_of,
            kind,
            data,
            n_pade,
        })
    }

    /// Number of cached modes that use the Padé fallback.
    pub fn pade_modes(&self) -> usize {
        self.n_pade
    }

    fn slot(&self, flat: usize) -> (usize, bool) {
        let s = self.slot_of[flat];
        ((s & !CONJ_BIT) as usize, s & CONJ_BIT != 0)
    }

    fn slot_data(&self, slot: usize) -> &[Complex64] {
        let n = self.sys.n();
        let stride = n + 2 * n * n;
        &self.data[slot * stride..(slot + 1) * stride]
    }

    /// `exp(tE(ξ_k))` for a grid mode.
    pub fn mode_matrix(&self, flat: usize, t: f64) -> Result<CMat, PropagateError> {
        let n = self.sys.n();
        let (slot, conj) = self.slot(flat);
        let d = self.slot_data(slot);
        let cj = |z: Complex64| if conj { z.conj() } else { z };
        let mut out = CMat::zeros(n, n);
        if self.kind[slot] == KIND_EIGEN {
            let (vals, rest) = d.split_at(n);
            let (v, vinv) = rest.split_at(n * n);
            for i in 0..n {
                for j in 0..n {
                    let mut acc = ZERO;
                    for k in 0..n {
                        acc += cj(v[i * n + k]) * (cj(vals[k]) * t).exp() * cj(vinv[k * n + j]);
                    }
                    out[(i, j)] = acc;
                }
            }
        } else {
            let mut e = CMat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    e[(i, j)] = cj(d[i * n + j]) * t;
                }
            }
            let xi = self.grid.xi(flat);
            out = linalg::expm(&e).ok_or_else(|| PropagateError::ExpmFailure {
                xi: xi[..self.sys.d].to_vec(),
            })?;
        }
        Ok(out)
    }

    fn check_field(&self, field: &SpectralField) -> Result<(), PropagateError> {
        if field.grid != self.grid || field.n_comp != self.sys.n() {
            return Err(PropagateError::ComponentMismatch(format!(
                "field has {} components on {:?}, propagator expects {} on {:?}",
                field.n_comp,
                field.grid,
                self.sys.n(),
                self.grid
            )));
        }
        Ok(())
    }

    /// Calls `visit(i, V(times[i]))` for each requested time, reusing one output buffer.
    pub fn evolve_with(
        &self,
        field0: &SpectralField,
        times: &[f64],
        mut visit: impl FnMut(usize, &SpectralField),
    ) -> Result<(), PropagateError> {
        self.check_field(field0)?;
        check_times(times)?;
        let n = self.sys.n();
        let m = self.grid.len();
        // Modal coordinates w = V⁻¹ v̂₀ for eigen modes.
        let mut w = vec![ZERO; n * m];
        for flat in 0..m {
            let (slot, conj) = self.slot(flat);
            if self.kind[slot] != KIND_EIGEN {
                continue;
            }
            let d = self.slot_data(slot);
            let vinv = &d[n + n * n..];
            for k in 0..n {
                let mut acc = ZERO;
                for j in 0..n {
                    let a = if conj { vinv[k * n + j].conj() } else { vinv[k * n + j] };
                    acc += a * field0.coeffs[j * m + flat];
                }
                w[flat * n + k] = acc;
            }
        }
        let mut out = SpectralField::zeros(self.grid, n);
        let mut ew = vec![ZERO; n];
        for (ti, &t) in times.iter().enumerate() {
            for flat in 0..m {
                let (slot, conj) = self.slot(flat);
                let d = self.slot_data(slot);
                if self.kind[slot] == KIND_EIGEN {
                    let cj = |z: Complex64| if conj { z.conj() } else { z };
                    for k in 0..n {
                        ew[k] = (cj(d[k]) * t).exp() * w[flat * n + k];
                    }
                    let v = &d[n..n + n * n];
                    for i in 0..n {
                        let mut acc = ZERO;
                        for k in 0..n {
                            acc += cj(v[i * n + k]) * ew[k];
                        }
                        out.coeffs[i * m + flat] = acc;
                    }
                } else {
                    let g = self.mode_matrix(flat, t)?;
                    for i in 0..n {
                        let mut acc = ZERO;
                        for j in 0..n {
                            acc += g[(i, j)] * field0.coeffs[j * m + flat];
                        }
                        out.coeffs[i * m + flat] = acc;
                    }
                }
            }
            visit(ti, &out);
        }
        Ok(())
    }

    pub fn evolve(&self, field0: &SpectralField, times: &[f64]) -> Result<Vec<SpectralField>, PropagateError> {
        let mut out = Vec::with_capacity(times.len());
        self.evolve_with(field0, times, |_, f| out.push(f.clone()))?;
        Ok(out)
    }
}

fn push_row_major(dst: &mut Vec<Complex64>, m: &CMat) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dst.push(m[(i, j)]);
        }
    }
}

fn check_times(times: &[f64]) -> Result<(), PropagateError> {
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(PropagateError::BadTimes);
    }
    Ok(())
}

/// Snapshots of the exact linear evolution at the requested times.
pub fn evolve_linear(
    sys: &SystemSpec,
    field0: &SpectralField,
    times: &[f64],
) -> Result<Vec<SpectralField>, PropagateError> {
    Propagator::new(sys, field0.grid)?.evolve(field0, times)
}

/// `S(ξ) = −Σ A^i_{1,2} D⁻¹ A^l_{2,1} ξ_i ξ_l`, the symbol of 𝒜.
pub fn parabolic_symbol(sys: &SystemSpec, xi: &[f64]) -> DMatrix<f64> {
    -sys.diffusion_matrix(xi)
}

fn require_elliptic(sys: &SystemSpec) -> Result<(), PropagateError> {
    let e = system::check_strong_ellipticity(sys, system::default_n_omega(sys.d));
    if e > EPS_SK {
        Ok(())
    } else {
        Err(PropagateError::NotElliptic(e))
    }
}

fn check_components(field: &SpectralField, want: usize, what: &str) -> Result<(), PropagateError> {
    if field.n_comp != want {
        return Err(PropagateError::ComponentMismatch(format!(
            "{what} needs {want} components, got {}",
            field.n_comp
        )));
    }
    Ok(())
}

/// Applies a per-mode complex matrix to the field's component vector.
fn apply_multiplier(
    field: &SpectralField,
    n_out: usize,
    mut mult: impl FnMut(&[f64]) -> CMat,
) -> SpectralField {
    let m = field.modes();
    let d = field.grid.d;
    let mut out = SpectralField::zeros(field.grid, n_out);
    for flat in 0..m {
        let xi = field.grid.xi(flat);
        let a = mult(&xi[..d]);
        for i in 0..n_out {
            let mut acc = ZERO;
            for j in 0..field.n_comp {
                acc += a[(i, j)] * field.coeffs[j * m + flat];
            }
            out.coeffs[i * m + flat] = acc;
        }
    }
    out
}

/// `e^{t𝒜} ψ₀` per mode.
pub fn parabolic_semigroup(sys: &SystemSpec, psi0: &SpectralField, t: f64) -> Result<SpectralField, PropagateError> {
    require_elliptic(sys)?;
    check_components(psi0, sys.n1, "parabolic_semigroup")?;
    Ok(parabolic_apply(sys, psi0, t))
}

fn parabolic_apply(sys: &SystemSpec, psi0: &SpectralField, t: f64) -> SpectralField {
    if sys.n1 == 1 {
        let m = psi0.modes();
        let mut out = psi0.clone();
        for flat in 0..m {
            let xi = psi0.grid.xi(flat);
            let s = parabolic_symbol(sys, &xi[..sys.d])[(0, 0)];
            out.coeffs[flat] *= (s * t).exp();
        }
        return out;
    }
    apply_multiplier(psi0, sys.n1, |xi| {
        let (vals, vecs) = linalg::sym_eig(&parabolic_symbol(sys, xi));
        let mut e = DMatrix::zeros(sys.n1, sys.n1);
        for (k, l) in vals.iter().enumerate() {
            let v = vecs.column(k);
            e += (l * t).exp() * &v * v.transpose();
        }
        linalg::real_to_complex(&e)
    })
}

/// `i B(ξ)` with `B(ξ) = Σ ξ_i A^i_{1,2}`.
fn i_times(m: &DMatrix<f64>) -> CMat {
    m.map(|x| Complex64::new(0.0, x))
}

/// Ψ̂ = V̂₁ − i B(ξ) D⁻¹ V̂₂.
pub fn effective_quantity(sys: &SystemSpec, field: &SpectralField) -> Result<SpectralField, PropagateError> {
    check_components(field, sys.n(), "effective_quantity")?;
    let (n1, n2) = (sys.n1, sys.n2);
    Ok(apply_multiplier(field, n1, |xi| {
        let bd = sys.coupling(xi) * sys.d_inv();
        let mut a = CMat::zeros(n1, n1 + n2);
        for i in 0..n1 {
            a[(i, i)] = Complex64::new(1.0, 0.0);
            for j in 0..n2 {
                a[(i, n1 + j)] = Complex64::new(0.0, -bd[(i, j)]);
            }
        }
        a
    }))
}

/// Ẑ = V̂₂ + i D⁻¹ (B(ξ)ᵀ V̂₁ + C(ξ) V̂₂).
pub fn damped_mode(sys: &SystemSpec, field: &SpectralField) -> Result<SpectralField, PropagateError> {
    check_components(field, sys.n(), "damped_mode")?;
    let (n1, n2) = (sys.n1, sys.n2);
    Ok(apply_multiplier(field, n2, |xi| {
        let db = sys.d_inv() * sys.coupling(xi).transpose();
        let dc = sys.d_inv() * sys.dissipative_flux(xi);
        let mut a = CMat::zeros(n2, n1 + n2);
        for i in 0..n2 {
            for j in 0..n1 {
                a[(i, j)] = Complex64::new(0.0, db[(i, j)]);
            }
            for j in 0..n2 {
                a[(i, n1 + j)] = Complex64::new(if i == j { 1.0 } else { 0.0 }, dc[(i, j)]);
            }
        }
        a
    }))
}

/// `V₁* = e^{t𝒜}Ψ₀`, `V₂* = −i D⁻¹ B(ξ)ᵀ V̂₁*`.
pub fn chapman_profile(sys: &SystemSpec, psi0: &SpectralField, t: f64) -> Result<SpectralField, PropagateError> {
    let v1 = parabolic_semigroup(sys, psi0, t)?;
    let v2 = apply_multiplier(&v1, sys.n2, |xi| -i_times(&(sys.d_inv() * sys.coupling(xi).transpose())));
    Ok(v1.concat(&v2))
}

/// `L₁(Ψ, Z) = −B D⁻¹ (C + i Bᵀ B D⁻¹) ℬ⁻¹ (D Ẑ − i Bᵀ Ψ̂)` with `ℬ = D + iC − Bᵀ B D⁻¹`,
/// so that `∂_tΨ − 𝒜Ψ = L₁(Ψ, Z)` along exact linear solutions.
fn l1_apply(sys: &SystemSpec, psi: &SpectralField, z: &SpectralField) -> SpectralField {
    let both = psi.concat(z);
    let (n1, n2) = (sys.n1, sys.n2);
    apply_multiplier(&both, n1, |xi| {
        let b = linalg::real_to_complex(&sys.coupling(xi));
        let c = linalg::real_to_complex(&sys.dissipative_flux(xi));
        let d = linalg::real_to_complex(&sys.dmat);
        let dinv = linalg::real_to_complex(sys.d_inv());
        let bt = b.transpose();
        let script_b = &d + &c * I - &bt * &b * &dinv;
        let sb_inv = script_b.try_inverse().unwrap_or_else(|| CMat::zeros(n2, n2));
        let left = -(&b * &dinv) * (&c + &bt * &b * &dinv * I) * sb_inv;
        let on_psi = &left * (-&bt * I);
        let on_z = &left * &d;
        let mut a = CMat::zeros(n1, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&on_psi);
        a.view_mut((0, n1), (n1, n2)).copy_from(&on_z);
        a
    })
}

/// Relative residual `‖∂_tΨ − 𝒜Ψ − L₁(Ψ,Z)‖ / ‖∂_tΨ‖` at time `t`, with `∂_t` taken by
/// fourth-order central differences of step `h` along the exact linear solution.
pub fn diagonalization_residual(
    prop: &Propagator,
    field0: &SpectralField,
    t: f64,
    h: f64,
) -> Result<f64, PropagateError> {
    let sys = &prop.sys;
    let times = [t - 2.0 * h, t - h, t, t + h, t + 2.0 * h];
    let snaps = prop.evolve(field0, &times)?;
    let psis: Vec<SpectralField> = snaps
        .iter()
        .map(|s| effective_quantity(sys, s))
        .collect::<Result<_, _>>()?;
    let dpsi = psis[0]
        .sub(&psis[4])?
        .add(&psis[3].sub(&psis[1])?.scaled(8.0))?
        .scaled(1.0 / (12.0 * h));
    let psi = &psis[2];
    let z = damped_mode(sys, &snaps[2])?;
    let a_psi = apply_multiplier(psi, sys.n1, |xi| linalg::real_to_complex(&parabolic_symbol(sys, xi)));
    let rhs = a_psi.add(&l1_apply(sys, psi, &z))?;
    let num = lp_norm(&dpsi.sub(&rhs)?, 2.0);
    Ok(num / lp_norm(&dpsi, 2.0))
}

/// Two-sided exponential envelope of block-localized linear evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusEnvelope {
    pub j: i32,
    pub p: f64,
    pub times: Vec<f64>,
    pub v1_norms: Vec<f64>,
    pub v2_norms: Vec<f64>,
    /// Rate of the lower envelope `c₀e^{−r t}` (largest secant rate from the first sample).
    pub r_lower: f64,
    /// Rate of the upper envelope `C₀e^{−R t}` (chord rate over the window).
    pub r_upper: f64,
    pub c0: f64,
    pub c0_upper: f64,
    /// `Σ_w λ_min(B D⁻¹ Bᵀ(ξ))` averaged with weights `|V̂₁,₀|²`; equals `c*²·mean|ξ|²` for Euler.
    pub reference_rate: f64,
    /// `max ‖V₂(t)‖ / (λ e^{−R t}(‖V₁,₀‖ + λ‖V₂,₀‖) + e^{−κ₁ t}‖V₂,₀‖)` over all samples.
    pub c1: f64,
    pub kappa1: f64,
    /// Range of `‖V₂(t)‖ / (λ‖V₁(t)‖)` over the diffusive window.
    pub v2_ratio: (f64, f64),
    pub lambda0: f64,
}

/// Default sample times: 40 geometric points in `[0.1/g, 20/g]`, `g` the fastest diffusive rate
/// in block `j`.
pub fn envelope_times(sys: &SystemSpec, j: i32) -> Vec<f64> {
    let omegas = system::sphere_samples(sys.d, system::default_n_omega(sys.d));
    let top = omegas
        .iter()
        .map(|w| *linalg::sym_eig(&sys.diffusion_matrix(w)).0.last().unwrap())
        .fold(0.0, f64::max);
    let g = top * (8.0 / 3.0 * 2f64.powi(j)).powi(2);
    geometric(0.1 / g, 20.0 / g, 40)
}

pub fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Evolves random data supported in block `j` and fits exponential envelopes of `‖V₁‖` and `‖V₂‖`.
pub fn annulus_envelope(
    sys: &SystemSpec,
    grid: GridConfig,
    j: i32,
    p: f64,
    times: &[f64],
    seed: u64,
) -> Result<AnnulusEnvelope, PropagateError> {
    let field0 = block_field(grid, j, sys.n(), seed);
    annulus_envelope_for(sys, &field0, j, p, times)
}

/// As [`annulus_envelope`] for given block-`j` data.
pub fn annulus_envelope_for(
    sys: &SystemSpec,
    field0: &SpectralField,
    j: i32,
    p: f64,
    times: &[f64],
) -> Result<AnnulusEnvelope, PropagateError> {
    let sk = system::check_sk(sys, system::default_n_omega(sys.d), 121)?;
    let lam = 2f64.powi(j);
    if lam > sk.lambda0 {
        return Err(PropagateError::RegimeViolation {
            j,
            scale: lam,
            lambda0: sk.lambda0,
        });
    }
    let window: Vec<f64> = if times.is_empty() {
        envelope_times(sys, j)
    } else {
        times.to_vec()
    };
    if window.len() < 3 {
        return Err(PropagateError::BadTimes);
    }
    let kappa1 = 0.5 * sys.kappa;
    let damped = geometric(0.01 / sys.kappa, 20.0 / sys.kappa, 20);
    let mut all: Vec<f64> = vec![0.0];
    all.extend(window.iter().chain(&damped));
    all.sort_by(f64::total_cmp);
    all.dedup();
    let prop = Propagator::new(sys, field0.grid)?;
    let mut n1 = Vec::with_capacity(all.len());
    let mut n2 = Vec::with_capacity(all.len());
    prop.evolve_with(field0, &all, |_, f| {
        n1.push(lp_norm(&f.select(0..sys.n1), p));
        n2.push(lp_norm(&f.select(sys.n1..sys.n()), p));
    })?;
    let at = |t: f64| all.iter().position(|&s| s == t).expect("sample present");
    let idx: Vec<usize> = window.iter().map(|&t| at(t)).collect();
    let (t0, y0) = (window[0], n1[idx[0]].ln());
    let last = *idx.last().unwrap();
    let r_upper = (y0 - n1[last].ln()) / (all[last] - t0);
    let r_lower = idx[1..]
        .iter()
        .map(|&k| (y0 - n1[k].ln()) / (all[k] - t0))
        .fold(f64::NEG_INFINITY, f64::max);
    let base = n1[0];
    // Both envelopes include t = 0, where the ratio is 1.
    let c0 = idx.iter().map(|&k| n1[k] * (r_lower * all[k]).exp() / base).fold(1.0, f64::min);
    let c0_upper = idx
        .iter()
        .map(|&k| n1[k] * (r_upper * all[k]).exp() / base)
        .fold(1.0, f64::max);
    let (v10, v20) = (n1[0], n2[0]);
    let c1 = (0..all.len())
        .map(|k| {
            let t = all[k];
            let bound = lam * (-r_upper * t).exp() * (v10 + lam * v20) + (-kappa1 * t).exp() * v20;
            n2[k] / bound
        })
        .fold(0.0, f64::max);
    let ratios: Vec<f64> = idx.iter().map(|&k| n2[k] / (lam * n1[k])).collect();
    let v2_ratio = (
        ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        ratios.iter().cloned().fold(0.0, f64::max),
    );
    let reference_rate = weighted_diffusion_rate(sys, field0);
    Ok(AnnulusEnvelope {
        j,
        p,
        times: window.clone(),
        v1_norms: idx.iter().map(|&k| n1[k]).collect(),
        v2_norms: idx.iter().map(|&k| n2[k]).collect(),
        r_lower,
        r_upper,
        c0,
        c0_upper,
        reference_rate,
        c1,
        kappa1,
        v2_ratio,
        lambda0: sk.lambda0,
    })
}

fn weighted_diffusion_rate(sys: &SystemSpec, field: &SpectralField) -> f64 {
    let m = field.modes();
    let (mut num, mut den) = (0.0, 0.0);
    for flat in 0..m {
        let w: f64 = (0..sys.n1).map(|c| field.coeffs[c * m + flat].norm_sqr()).sum();
        if w == 0.0 {
            continue;
        }
        let xi = field.grid.xi(flat);
        let rate = linalg::sym_eig(&sys.diffusion_matrix(&xi[..sys.d])).0[0];
        num += w * rate;
        den += w;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::fixtures;

    #[test]
    fn mode_exponential_identity_at_zero_time() {
        let s = fixtures::euler2d();
        for xi in [[0.0, 0.0], [0.3, -0.1], [0.5, 0.0], [3.0, 4.0]] {
            let g = mode_exponential(&s, &xi, 0.0).unwrap();
            assert!(linalg::norm_fro(&(g - CMat::identity(3, 3))) < 1e-14);
        }
    }

    #[test]
    fn defective_radius_uses_pade() {
        let s = fixtures::euler1d();
        assert!(matches!(ModeFactor::new(&s, &[0.5]).unwrap(), ModeFactor::Pade(_)));
        assert!(matches!(ModeFactor::new(&s, &[0.3]).unwrap(), ModeFactor::Eigen(_)));
    }

    #[test]
    fn single_mode_matches_closed_form() {
        // ξ = 0.3, V̂₀ = (1, 0): â(1) = e^{−0.1}·(1/2)(1 + 1/0.8) + e^{−0.9}·(1/2)(1 − 1/0.8).
        let s = fixtures::euler1d();
        let g = mode_exponential(&s, &[0.3], 1.0).unwrap();
        let want = (-0.1f64).exp() * 0.5 * (1.0 + 1.25) + (-0.9f64).exp() * 0.5 * (1.0 - 1.25);
        assert!((g[(0, 0)].re - want).abs() < 1e-12 && g[(0, 0)].im.abs() < 1e-14);
    }

    #[test]
    fn semigroup_property_on_modes() {
        let s = fixtures::euler2d();
        for xi in [[0.01, 0.02], [0.35, 0.2], [0.5, 0.0], [2.0, -1.0]] {
            let a = mode_exponential(&s, &xi, 0.7).unwrap();
            let b = mode_exponential(&s, &xi, 1.9).unwrap();
            let c = mode_exponential(&s, &xi, 2.6).unwrap();
            assert!(linalg::norm_fro(&(&a * &b - &c)) <= 1e-10 * linalg::norm_fro(&c));
        }
    }
}
