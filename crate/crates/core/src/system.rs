//! Constant-coefficient partially dissipative systems in normal form
//!
//! `∂_t V + Σ A^i ∂_i V + L V = 0` with `L = blockdiag(0, D)`, `V = (V₁, V₂) ∈ R^{n1} × R^{n2}`.

use crate::linalg::{self, CMat};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SYM_TOL: f64 = 1e-12;

/// Threshold on the kernel margin below which the SK condition is considered violated.
pub const EPS_SK: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("A^{0} is not symmetric")]
    AsymmetricMatrix(usize),
    #[error("D is not symmetric")]
    AsymmetricDissipation,
    #[error("D is not positive definite (min eigenvalue {0:e})")]
    NonPositiveDissipation(f64),
    #[error("top-left block of A^{0} is not zero")]
    NonzeroA11(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("eigenvalue iteration failed at xi = {xi:?}")]
    EigenSolveFailure { xi: Vec<f64> },
    #[error("unknown builtin system '{0}'")]
    UnknownBuiltin(String),
    #[error("cannot parse system file: {0}")]
    Parse(String),
}

/// Unvalidated input: matrices stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSystem {
    pub name: String,
    pub d: usize,
    pub n1: usize,
    pub n2: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub dmat: Vec<f64>,
}

/// A validated normal-form system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub d: usize,
    pub n1: usize,
    pub n2: usize,
    pub a: Vec<DMatrix<f64>>,
    pub dmat: DMatrix<f64>,
    /// Smallest eigenvalue of `D`.
    pub kappa: f64,
    d_inv: DMatrix<f64>,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Checks dimensions and the structural invariants, then records κ = min eig(D).
pub fn validate(raw: &RawSystem) -> Result<SystemSpec, SystemError> {
    let n = raw.n1 + raw.n2;
    if raw.d == 0 || raw.d > 3 {
        return Err(SystemError::DimensionMismatch(format!("d = {} not in 1..=3", raw.d)));
    }
    if raw.n1 == 0 || raw.n2 == 0 {
        return Err(SystemError::DimensionMismatch("n1 and n2 must be positive".into()));
    }
    if raw.a.len() != raw.d {
        return Err(SystemError::DimensionMismatch(format!(
            "expected {} flux matrices, got {}",
            raw.d,
            raw.a.len()
        )));
    }
    for (i, ai) in raw.a.iter().enumerate() {
        if ai.len() != n * n {
            return Err(SystemError::DimensionMismatch(format!(
                "A^{} has {} entries, expected {}",
                i + 1,
                ai.len(),
                n * n
            )));
        }
    }
    if raw.dmat.len() != raw.n2 * raw.n2 {
        return Err(SystemError::DimensionMismatch(format!(
            "D has {} entries, expected {}",
            raw.dmat.len(),
            raw.n2 * raw.n2
        )));
    }
    let a: Vec<DMatrix<f64>> = raw.a.iter().map(|v| DMatrix::from_row_slice(n, n, v)).collect();
    for (i, ai) in a.iter().enumerate() {
        if max_abs(&(ai - ai.transpose())) > SYM_TOL {
            return Err(SystemError::AsymmetricMatrix(i + 1));
        }
    }
    let dmat = DMatrix::from_row_slice(raw.n2, raw.n2, &raw.dmat);
    if max_abs(&(&dmat - dmat.transpose())) > SYM_TOL {
        return Err(SystemError::AsymmetricDissipation);
    }
    let (evals, _) = linalg::sym_eig(&dmat);
    let kappa = evals[0];
    if kappa <= 0.0 {
        return Err(SystemError::NonPositiveDissipation(kappa));
    }
    for (i, ai) in a.iter().enumerate() {
        if max_abs(&ai.view((0, 0), (raw.n1, raw.n1)).into_owned()) > SYM_TOL {
            return Err(SystemError::NonzeroA11(i + 1));
        }
    }
    let d_inv = dmat.clone().try_inverse().ok_or(SystemError::NonPositiveDissipation(kappa))?;
    Ok(SystemSpec {
        name: raw.name.clone(),
        d: raw.d,
        n1: raw.n1,
        n2: raw.n2,
        a,
        dmat,
        kappa,
        d_inv,
    })
}

impl SystemSpec {
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn d_inv(&self) -> &DMatrix<f64> {
        &self.d_inv
    }

    /// The same fluxes with `D = 0`: a purely hyperbolic generator with skew-Hermitian symbol.
    ///
    /// Only [`SystemSpec::symbol`] is meaningful on the result; it is not a valid normal form.
    pub fn without_dissipation(&self) -> SystemSpec {
        SystemSpec {
            name: format!("{}-undamped", self.name),
            dmat: DMatrix::zeros(self.n2, self.n2),
            kappa: 0.0,
            ..self.clone()
        }
    }

    pub fn to_raw(&self) -> RawSystem {
        let row_major = |m: &DMatrix<f64>| -> Vec<f64> {
            let mut v = Vec::with_capacity(m.len());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    v.push(m[(i, j)]);
                }
            }
            v
        };
        RawSystem {
            name: self.name.clone(),
            d: self.d,
            n1: self.n1,
            n2: self.n2,
            a: self.a.iter().map(row_major).collect(),
            dmat: row_major(&self.dmat),
        }
    }

    /// Parses the key-value system file format.
    pub fn from_toml_str(s: &str) -> Result<Self, SystemError> {
        let raw: RawSystem = toml::from_str(s).map_err(|e| SystemError::Parse(e.to_string()))?;
        validate(&raw)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_raw()).expect("system serializes")
    }

    /// `A(ω) = Σ ω_i A^i`.
    pub fn flux(&self, omega: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (ai, &w) in self.a.iter().zip(omega) {
            m += ai * w;
        }
        m
    }

    /// `B(ω) = Σ ω_i A^i_{1,2}`, an n1×n2 block.
    pub fn coupling(&self, omega: &[f64]) -> DMatrix<f64> {
        self.flux(omega).view((0, self.n1), (self.n1, self.n2)).into_owned()
    }

    /// `C(ω) = Σ ω_i A^i_{2,2}`.
    pub fn dissipative_flux(&self, omega: &[f64]) -> DMatrix<f64> {
        self.flux(omega).view((self.n1, self.n1), (self.n2, self.n2)).into_owned()
    }

    /// `Σ_{i,l} A^i_{1,2} D⁻¹ A^l_{2,1} ω_i ω_l = B D⁻¹ Bᵀ`.
    pub fn diffusion_matrix(&self, omega: &[f64]) -> DMatrix<f64> {
        let b = self.coupling(omega);
        let a21 = self.flux(omega).view((self.n1, 0), (self.n2, self.n1)).into_owned();
        &b * &self.d_inv * a21
    }

    /// Fourier generator `E(ξ) = −(i Σ A^k ξ_k + L)`.
    pub fn symbol(&self, xi: &[f64]) -> CMat {
        let n = self.n();
        let f = self.flux(xi);
        let mut e = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                e[(i, j)] = Complex64::new(0.0, -f[(i, j)]);
            }
        }
        for i in 0..self.n2 {
            for j in 0..self.n2 {
                e[(self.n1 + i, self.n1 + j)] -= self.dmat[(i, j)];
            }
        }
        e
    }
}

/// Stability diagnostics of a system.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SKReport {
    pub passes: bool,
    pub kernel_margin: f64,
    pub max_re_lambda: f64,
    pub dissipation_c: f64,
    pub ellipticity_min: f64,
    pub lambda0: f64,
    pub n_omega: usize,
    pub n_xi: usize,
}

impl SKReport {
    /// Positive ellipticity and a passing SK verdict must coincide.
    pub fn ellipticity_consistent(&self) -> bool {
        (self.ellipticity_min > EPS_SK) == self.passes
    }
}

/// Unit directions used for sphere scans: `{±1}` in 1D, equispaced angles in 2D,
/// a latitude-longitude grid in 3D.
pub fn sphere_samples(d: usize, n_omega: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n_omega)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / n_omega as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            let n_lat = (n_omega / 2).max(2);
            let n_lon = n_omega.max(4);
            let mut out = Vec::with_capacity(n_lat * n_lon);
            for a in 0..n_lat {
                let th = PI * (a as f64 + 0.5) / n_lat as f64;
                for b in 0..n_lon {
                    let ph = 2.0 * PI * b as f64 / n_lon as f64;
                    out.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
                }
            }
            out
        }
    }
}

fn log_radii(n_xi: usize) -> Vec<f64> {
    let n = n_xi.max(2);
    (0..n)
        .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / (n - 1) as f64))
        .collect()
}

/// `min over W of σ_min({I−P} Q_W)` with `W` ranging over eigenspaces of `A(ω)`.
fn kernel_margin_at(sys: &SystemSpec, omega: &[f64]) -> f64 {
    let flux = sys.flux(omega);
    let (vals, vecs) = linalg::sym_eig(&flux);
    let n = sys.n();
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let mut margin = f64::INFINITY;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (vals[end] - vals[end - 1]).abs() <= tol {
            end += 1;
        }
        let q = vecs.view((sys.n1, start), (sys.n2, end - start)).into_owned();
        margin = margin.min(linalg::sigma_min(&q));
        start = end;
    }
    margin
}

fn imag_threshold(l: Complex64) -> f64 {
    1e-10 * l.norm().max(1.0)
}

fn has_complex_pair(sys: &SystemSpec, omega: &[f64], r: f64) -> Result<bool, SystemError> {
    let xi: Vec<f64> = omega.iter().map(|w| w * r).collect();
    let ev = linalg::eigenvalues(&sys.symbol(&xi)).ok_or(SystemError::EigenSolveFailure { xi })?;
    Ok(ev.iter().any(|l| l.im.abs() > imag_threshold(*l)))
}

/// First radius along `omega` where an eigenvalue of `E(rω)` leaves the real axis,
/// refined by bisection between scan points.
fn crossing_radius(sys: &SystemSpec, omega: &[f64], radii: &[f64]) -> Result<Option<f64>, SystemError> {
    let mut prev: Option<f64> = None;
    for &r in radii {
        if has_complex_pair(sys, omega, r)? {
            let mut lo = prev.unwrap_or(0.0);
            let mut hi = r;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mid <= 0.0 || has_complex_pair(sys, omega, mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        prev = Some(r);
    }
    Ok(None)
}

/// `min over ω` of the smallest eigenvalue of the symmetric part of `B(ω)D⁻¹B(ω)ᵀ`.
pub fn check_strong_ellipticity(sys: &SystemSpec, n_omega: usize) -> f64 {
    sphere_samples(sys.d, n_omega)
        .iter()
        .map(|w| {
            let m = sys.diffusion_matrix(w);
            let sym = (&m + m.transpose()) * 0.5;
            linalg::sym_eig(&sym).0[0]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Kernel test, eigenvalue scan over `|ξ| ∈ [1e−3, 1e3]` and λ₀ estimate.
pub fn check_sk(sys: &SystemSpec, n_omega: usize, n_xi: usize) -> Result<SKReport, SystemError> {
    let omegas = sphere_samples(sys.d, n_omega);
    let radii = log_radii(n_xi);
    let mut kernel_margin = f64::INFINITY;
    let mut max_re_lambda = f64::NEG_INFINITY;
    let mut dissipation_c = f64::INFINITY;
    let mut lambda0 = 1e3f64;
    for w in &omegas {
        kernel_margin = kernel_margin.min(kernel_margin_at(sys, w));
        for &r in &radii {
            let xi: Vec<f64> = w.iter().map(|x| x * r).collect();
            let ev = linalg::eigenvalues(&sys.symbol(&xi))
                .ok_or_else(|| SystemError::EigenSolveFailure { xi: xi.clone() })?;
            let re_max = ev.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
            max_re_lambda = max_re_lambda.max(re_max);
            dissipation_c = dissipation_c.min(-re_max * (1.0 + r * r) / (r * r));
        }
        if let Some(rc) = crossing_radius(sys, w, &radii)? {
            lambda0 = lambda0.min(0.9 * rc);
        }
    }
    let ellipticity_min = check_strong_ellipticity(sys, n_omega);
    let passes = kernel_margin > EPS_SK && max_re_lambda < 0.0 && dissipation_c > EPS_SK;
    Ok(SKReport {
        passes,
        kernel_margin,
        max_re_lambda,
        dissipation_c,
        ellipticity_min,
        lambda0,
        n_omega: omegas.len(),
        n_xi: radii.len(),
    })
}

/// Default sphere resolution: 256 angles in 2D, 32×64 in 3D.
pub fn default_n_omega(d: usize) -> usize {
    match d {
        1 => 2,
        2 => 256,
        _ => 64,
    }
}

/// Builtin fixtures.
pub mod fixtures {
    use super::*;

    /// Symmetrized linear damped Euler with sound speed `c_star`.
    pub fn euler(d: usize, c_star: f64) -> SystemSpec {
        let n = d + 1;
        let a = (0..d)
            .map(|i| {
                let mut m = vec![0.0; n * n];
                m[i + 1] = c_star;
                m[(i + 1) * n] = c_star;
                m
            })
            .collect();
        let mut dm = vec![0.0; d * d];
        for i in 0..d {
            dm[i * d + i] = 1.0;
        }
        validate(&RawSystem {
            name: format!("euler{d}d"),
            d,
            n1: 1,
            n2: d,
            a,
            dmat: dm,
        })
        .expect("euler fixture is valid")
    }

    pub fn euler1d() -> SystemSpec {
        euler(1, 1.0)
    }

    pub fn euler2d() -> SystemSpec {
        euler(2, 1.0)
    }

    /// `A¹ = diag(0, 1)`, `D = [[1]]`: the conservative component never couples.
    pub fn decoupled1d() -> SystemSpec {
        validate(&RawSystem {
            name: "decoupled1d".into(),
            d: 1,
            n1: 1,
            n2: 1,
            a: vec![vec![0.0, 0.0, 0.0, 1.0]],
            dmat: vec![1.0],
        })
        .expect("decoupled fixture is valid")
    }

    /// `A¹ = [[0,1],[1,0]]`, `D = [[κ]]`.
    pub fn toy_relaxation(kappa: f64) -> Result<SystemSpec, SystemError> {
        validate(&RawSystem {
            name: format!("toy-relaxation:{kappa}"),
            d: 1,
            n1: 1,
            n2: 1,
            a: vec![vec![0.0, 1.0, 1.0, 0.0]],
            dmat: vec![kappa],
        })
    }

    /// Resolves `euler1d`, `euler2d`, `decoupled1d`, `toy-relaxation` or `toy-relaxation:<κ>`.
    pub fn builtin(name: &str) -> Result<SystemSpec, SystemError> {
        match name {
            "euler1d" => Ok(euler1d()),
            "euler2d" => Ok(euler2d()),
            "decoupled1d" => Ok(decoupled1d()),
            "toy-relaxation" => toy_relaxation(1.0),
            _ => {
                if let Some(k) = name.strip_prefix("toy-relaxation:") {
                    let kappa: f64 = k.parse().map_err(|_| SystemError::UnknownBuiltin(name.into()))?;
                    toy_relaxation(kappa)
                } else {
                    Err(SystemError::UnknownBuiltin(name.into()))
                }
            }
        }
    }

    pub const BUILTIN_NAMES: [&str; 4] = ["euler1d", "euler2d", "decoupled1d", "toy-relaxation"];
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn raw(a: Vec<Vec<f64>>, d: Vec<f64>) -> RawSystem {
        RawSystem {
            name: "t".into(),
            d: 1,
            n1: 1,
            n2: 1,
            a,
            dmat: d,
        }
    }

    #[test]
    fn euler1d_is_valid_with_unit_kappa() {
        let s = euler1d();
        assert_eq!(s.kappa, 1.0);
        assert_eq!(s.a[0], DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn validation_errors() {
        let e = validate(&raw(vec![vec![0.0, 1.0, 1.0, 0.0]], vec![-1.0])).unwrap_err();
        assert_eq!(e, SystemError::NonPositiveDissipation(-1.0));
        let e = validate(&raw(vec![vec![0.0, 1.0, 0.0, 0.0]], vec![1.0])).unwrap_err();
        assert_eq!(e, SystemError::AsymmetricMatrix(1));
        let e = validate(&raw(vec![vec![2.0, 1.0, 1.0, 0.0]], vec![1.0])).unwrap_err();
        assert_eq!(e, SystemError::NonzeroA11(1));
        let e = validate(&raw(vec![vec![0.0, 1.0, 1.0]], vec![1.0])).unwrap_err();
        assert!(matches!(e, SystemError::DimensionMismatch(_)));
        let mut r = raw(vec![vec![0.0; 9]], vec![1.0, 0.5, 0.0, 1.0]);
        r.n2 = 2;
        assert_eq!(validate(&r).unwrap_err(), SystemError::AsymmetricDissipation);
    }

    #[test]
    fn symbol_at_zero_is_minus_l() {
        let e = euler1d().symbol(&[0.0]);
        assert_eq!(e[(0, 0)], Complex64::new(0.0, 0.0));
        assert_eq!(e[(1, 1)], Complex64::new(-1.0, 0.0));
        assert_eq!(e[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn symbol_eigenvalues_at_point_three() {
        let ev = linalg::eigenvalues(&euler1d().symbol(&[0.3])).unwrap();
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 0.9).abs() < 1e-12);
        assert!((re[1] + 0.1).abs() < 1e-12);
        assert!(ev.iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn symbol_conjugation_symmetry() {
        let s = euler2d();
        let xi = [0.37, -1.2];
        let a = s.symbol(&xi);
        let b = s.symbol(&[-xi[0], -xi[1]]);
        assert!(linalg::norm_fro(&(b - a.map(|z| z.conj()))) < 1e-14);
    }

    #[test]
    fn euler_sk_report() {
        let r = check_sk(&euler1d(), 2, 241).unwrap();
        assert!(r.passes);
        assert!((r.ellipticity_min - 1.0).abs() < 1e-14);
        assert!((r.kernel_margin - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        // Re λ_max = −1/2 + Re√(1−4ξ²)/2 ⇒ −Re λ_max (1+ξ²)/ξ² → 1 as ξ → 0, equals 1/2·(1+ξ²)/ξ² past 1/2.
        assert!(r.dissipation_c > 0.45 && r.dissipation_c <= 1.0 + 1e-6);
        assert!((r.lambda0 - 0.45).abs() < 1e-6, "lambda0 = {}", r.lambda0);
    }

    #[test]
    fn decoupled_fails_with_zero_margin() {
        let s = decoupled1d();
        let r = check_sk(&s, 2, 61).unwrap();
        assert!(!r.passes);
        assert!(r.kernel_margin.abs() < 1e-10);
        assert_eq!(r.ellipticity_min, 0.0);
        assert!(r.ellipticity_consistent());
    }

    #[test]
    fn euler2d_ellipticity_uniform() {
        let s = euler2d();
        for w in sphere_samples(2, 256) {
            let m = s.diffusion_matrix(&w);
            assert!((m[(0, 0)] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn toml_round_trip() {
        let s = euler2d();
        let back = SystemSpec::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn builtin_names_resolve() {
        for n in fixtures::BUILTIN_NAMES {
            builtin(n).unwrap();
        }
        assert_eq!(builtin("toy-relaxation:2.5").unwrap().kappa, 2.5);
        assert!(builtin("nope").is_err());
    }
}
