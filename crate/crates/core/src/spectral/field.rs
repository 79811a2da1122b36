use super::grid::{FftNd, GridConfig};
use super::SpectralError;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Fourier coefficients of an `n_comp`-component real field on a periodic grid.
///
/// Coefficients are stored component-major; component `c` occupies
/// `coeffs[c·N^d .. (c+1)·N^d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub grid: GridConfig,
    pub n_comp: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridConfig, n_comp: usize) -> Self {
        Self {
            grid,
            n_comp,
            coeffs: vec![ZERO; n_comp * grid.len()],
        }
    }

    pub fn from_components(grid: GridConfig, comps: Vec<Vec<Complex64>>) -> Result<Self, SpectralError> {
        let m = grid.len();
        if comps.iter().any(|c| c.len() != m) {
            return Err(SpectralError::ComponentMismatch("component length differs from N^d".into()));
        }
        let n_comp = comps.len();
        Ok(Self {
            grid,
            n_comp,
            coeffs: comps.into_iter().flatten().collect(),
        })
    }

    /// Forward transform of real samples, one `Vec` per component.
    pub fn from_physical(grid: GridConfig, fft: &FftNd, comps: &[Vec<f64>]) -> Self {
        let mut out = Self::zeros(grid, comps.len());
        for (c, vals) in comps.iter().enumerate() {
            let buf = out.component_mut(c);
            for (z, &v) in buf.iter_mut().zip(vals) {
                *z = Complex64::new(v, 0.0);
            }
            fft.forward(buf);
        }
        out
    }

    /// Real samples of each component on the grid.
    pub fn to_physical(&self, fft: &FftNd) -> Vec<Vec<f64>> {
        (0..self.n_comp)
            .map(|c| {
                let mut buf = self.component(c).to_vec();
                fft.inverse(&mut buf);
                buf.into_iter().map(|z| z.re).collect()
            })
            .collect()
    }

    pub fn modes(&self) -> usize {
        self.grid.len()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let m = self.modes();
        &self.coeffs[c * m..(c + 1) * m]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let m = self.modes();
        &mut self.coeffs[c * m..(c + 1) * m]
    }

    /// Coefficient vector of all components at one mode.
    pub fn mode(&self, flat: usize) -> Vec<Complex64> {
        let m = self.modes();
        (0..self.n_comp).map(|c| self.coeffs[c * m + flat]).collect()
    }

    pub fn set_mode(&mut self, flat: usize, v: &[Complex64]) {
        let m = self.modes();
        for (c, &z) in v.iter().enumerate() {
            self.coeffs[c * m + flat] = z;
        }
    }

    /// Components `range` as a new field.
    pub fn select(&self, range: std::ops::Range<usize>) -> Self {
        let m = self.modes();
        Self {
            grid: self.grid,
            n_comp: range.len(),
            coeffs: self.coeffs[range.start * m..range.end * m].to_vec(),
        }
    }

    /// Stacks the components of `self` and `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.extend_from_slice(&other.coeffs);
        Self {
            grid: self.grid,
            n_comp: self.n_comp + other.n_comp,
            coeffs,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for z in out.coeffs.iter_mut() {
            *z *= c;
        }
        out
    }

    fn check_same(&self, other: &Self) -> Result<(), SpectralError> {
        if self.grid != other.grid || self.n_comp != other.n_comp {
            return Err(SpectralError::ComponentMismatch("fields differ in grid or components".into()));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SpectralError> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (z, w) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *z -= w;
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self, SpectralError> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (z, w) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *z += w;
        }
        Ok(out)
    }

    /// Multiplies every coefficient at mode `k` by `f(k)`.
    pub fn map_modes(&self, f: impl Fn(usize) -> f64) -> Self {
        let m = self.modes();
        let mut out = self.clone();
        for flat in 0..m {
            let w = f(flat);
            for c in 0..self.n_comp {
                out.coeffs[c * m + flat] *= w;
            }
        }
        out
    }

    /// `max |c(−k) − conj c(k)|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let m = self.modes();
        let scale = self.coeffs.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for c in 0..self.n_comp {
            let comp = self.component(c);
            for flat in 0..m {
                let p = self.grid.partner(flat);
                worst = worst.max((comp[p] - comp[flat].conj()).norm());
            }
        }
        worst / scale
    }

    /// Replaces each pair by its Hermitian average so the field is exactly real.
    pub fn symmetrize(&mut self) {
        let m = self.modes();
        let grid = self.grid;
        for c in 0..self.n_comp {
            let comp = self.component_mut(c);
            for flat in 0..m {
                let p = grid.partner(flat);
                if p >= flat {
                    let avg = 0.5 * (comp[flat] + comp[p].conj());
                    comp[flat] = avg;
                    comp[p] = avg.conj();
                }
            }
        }
    }

    /// Snapshot: a JSON document with grid metadata and coefficient pairs.
    pub fn write_snapshot<W: Write>(&self, w: W) -> Result<(), SpectralError> {
        serde_json::to_writer(w, self).map_err(|e| SpectralError::Io(e.to_string()))
    }

    pub fn read_snapshot<R: Read>(r: R) -> Result<Self, SpectralError> {
        let f: Self = serde_json::from_reader(r).map_err(|e| SpectralError::Io(e.to_string()))?;
        if f.coeffs.len() != f.n_comp * f.grid.len() {
            return Err(SpectralError::ComponentMismatch("snapshot length does not match header".into()));
        }
        Ok(f)
    }
}
