//! Small dense complex linear algebra: matrix exponential and eigendecomposition.
//!
//! Matrices here are at most a few rows, so everything works on `DMatrix<Complex64>`.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// One-norm (max absolute column sum).
pub fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn norm_fro(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Matrix exponential by Padé(13) scaling and squaring (Higham 2005).
///
/// Returns `None` if the Padé denominator is singular or the input is not finite.
pub fn expm(a: &CMat) -> Option<CMat> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let nrm = norm1(a);
    let s = if nrm > THETA_13 {
        (nrm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * Complex64::new(2f64.powi(-s), 0.0);
    let b = |k: usize| Complex64::new(PADE_13[k], 0.0);
    let ident = CMat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = &a * (&a6 * inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some(r)
}

/// Eigendecomposition `A = V diag(values) V⁻¹` of a general complex matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors as columns.
    pub vectors: CMat,
    pub inverse: CMat,
    /// Frobenius condition number of `vectors`.
    pub cond: f64,
}

impl Eigen {
    /// `V diag(f(λ)) V⁻¹`.
    pub fn apply_fn(&self, f: impl Fn(Complex64) -> Complex64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let fk = f(self.values[k]);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        scaled * &self.inverse
    }
}

/// Diagonal similarity `D⁻¹ A D` with power-of-two scalings (Parlett and Reinsch).
fn balance(a: &CMat) -> (CMat, Vec<f64>) {
    let n = a.nrows();
    let mut b = a.clone();
    let mut scale = vec![1.0; n];
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].l1_norm();
                    r += b[(i, j)].l1_norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let total = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * total {
                converged = false;
                scale[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    (b, scale)
}

/// Eigenvectors of an upper-triangular matrix by back substitution.
fn triangular_eigenvectors(t: &CMat) -> CMat {
    let n = t.nrows();
    let tiny = f64::EPSILON * norm_fro(t).max(f64::MIN_POSITIVE);
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = Complex64::new(1.0, 0.0);
        let lk = t[(k, k)];
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut den = t[(i, i)] - lk;
            if den.norm() < tiny {
                den = Complex64::new(tiny, 0.0);
            }
            y[(i, k)] = -acc / den;
        }
    }
    y
}

/// Complex Schur decomposition followed by triangular back substitution, with balancing.
///
/// Returns `None` if the QR iteration fails or the eigenvector matrix is singular.
pub fn eig(a: &CMat) -> Option<Eigen> {
    let n = a.nrows();
    let (b, scale) = balance(a);
    let schur = b.try_schur(1e-15, 10_000)?;
    let (q, t) = schur.unpack();
    let y = triangular_eigenvectors(&t);
    let mut v = q * y;
    for i in 0..n {
        for k in 0..n {
            v[(i, k)] *= scale[i];
        }
    }
    for k in 0..n {
        let nrm = v.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            return None;
        }
        for i in 0..n {
            v[(i, k)] /= nrm;
        }
    }
    let inverse = v.clone().try_inverse()?;
    let cond = norm_fro(&v) * norm_fro(&inverse);
    if !cond.is_finite() {
        return None;
    }
    let values = (0..n).map(|k| t[(k, k)]).collect();
    Some(Eigen {
        values,
        vectors: v,
        inverse,
        cond,
    })
}

/// Eigenvalues only, from the balanced Schur form.
pub fn eigenvalues(a: &CMat) -> Option<Vec<Complex64>> {
    let (b, _) = balance(a);
    let t = b.try_schur(1e-15, 10_000)?.unpack().1;
    Some((0..t.nrows()).map(|k| t[(k, k)]).collect())
}

/// Eigenvalues and orthonormal eigenvectors of a real symmetric matrix, ascending.
pub fn sym_eig(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let se = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &se.eigenvectors.column(i));
    }
    (values, vecs)
}

/// Smallest singular value.
pub fn sigma_min(a: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    if a.ncols() > a.nrows() {
        return 0.0;
    }
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn real_to_complex(a: &DMatrix<f64>) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn expm_zero_is_identity() {
        let z = CMat::zeros(3, 3);
        let e = expm(&z).unwrap();
        assert!(norm_fro(&(e - CMat::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn expm_jordan_block() {
        // exp([[l,1],[0,l]] t) = e^{lt} [[1,t],[0,1]]
        let l = c(-0.5, 0.0);
        let t = 3.0;
        let a = CMat::from_row_slice(2, 2, &[l * t, c(t, 0.0), c(0.0, 0.0), l * t]);
        let e = expm(&a).unwrap();
        let el = (l * t).exp();
        let want = CMat::from_row_slice(2, 2, &[el, el * t, c(0.0, 0.0), el]);
        assert!(norm_fro(&(e - &want)) / norm_fro(&want) < 1e-13);
    }

    #[test]
    fn expm_rotation_large_norm() {
        let th = 40.0;
        let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-th, 0.0), c(th, 0.0), c(0.0, 0.0)]);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)].re - th.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - th.sin()).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs() {
        let a = CMat::from_row_slice(
            3,
            3,
            &[
                c(0.0, 0.0),
                c(0.0, -0.3),
                c(0.0, -0.1),
                c(0.0, -0.3),
                c(-1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, -0.1),
                c(0.0, 0.0),
                c(-1.0, 0.0),
            ],
        );
        let e = eig(&a).unwrap();
        let rebuilt = e.apply_fn(|z| z);
        assert!(norm_fro(&(rebuilt - &a)) < 1e-13);
    }

    #[test]
    fn eig_matches_closed_form_pair() {
        // λ² + λ + ξ² = 0 at ξ = 0.3 gives {-0.1, -0.9}.
        let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -0.3), c(0.0, -0.3), c(-1.0, 0.0)]);
        let e = eig(&a).unwrap();
        let mut re: Vec<f64> = e.values.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 0.9).abs() < 1e-13 && (re[1] + 0.1).abs() < 1e-13);
    }

    #[test]
    fn eig_defective_is_ill_conditioned() {
        let a = CMat::from_row_slice(2, 2, &[c(-0.5, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        match eig(&a) {
            None => {}
            Some(e) => assert!(e.cond > 1e6),
        }
    }

    #[test]
    fn sigma_min_of_rank_deficient() {
        let a = DMatrix::from_row_slice(2, 1, &[0.0, 0.0]);
        assert_eq!(sigma_min(&a), 0.0);
        let b = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
        assert!((sigma_min(&b) - 5.0).abs() < 1e-14);
    }
}
