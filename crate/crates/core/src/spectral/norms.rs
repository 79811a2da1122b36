use super::field::SpectralField;
use super::grid::{pad_coefficients, FftNd};
use super::ladder::DyadicLadder;
use super::SpectralError;
use serde::{Deserialize, Serialize};

/// Zero-padding factor for physical-space quadrature. With twice the points the trapezoid
/// rule integrates `|u|^p` exactly for `p ∈ {2, 4}` when `u` is band-limited to the grid.
pub const QUADRATURE_PAD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Full,
    Low,
    High,
}

/// `Ḃ^s_{p,r}` restricted to a band, or the hybrid norm `‖u^ℓ‖_{Ḃ^{s1}_{p,1}} + ‖u‖^h_{Ḃ^{s2}_{2,1}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    /// Summation index; `f64::INFINITY` selects the supremum.
    #[serde(with = "extended_real")]
    pub r: f64,
    pub band: Band,
    pub hybrid: Option<(f64, f64)>,
}

mod extended_real {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Num(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad summation index {t}"))),
        }
    }
}

impl BesovSpec {
    pub fn new(s: f64, p: f64, r: f64, band: Band) -> Self {
        Self {
            s,
            p,
            r,
            band,
            hybrid: None,
        }
    }

    pub fn hybrid(s1: f64, s2: f64, p: f64) -> Self {
        Self {
            s: s1,
            p,
            r: 1.0,
            band: Band::Full,
            hybrid: Some((s1, s2)),
        }
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(SpectralError::InvalidExponent(format!("p = {} not in (1, ∞)", self.p)));
        }
        if !(self.r >= 1.0) {
            return Err(SpectralError::InvalidExponent(format!("r = {} not in [1, ∞]", self.r)));
        }
        if self.hybrid.is_some() && self.band != Band::Full {
            return Err(SpectralError::BandOutOfRange("hybrid norm needs band = full".into()));
        }
        Ok(())
    }
}

/// `(∫|u|^p)^{1/p}` over the torus; Plancherel at `p = 2`, padded quadrature otherwise.
pub fn lp_norm(field: &SpectralField, p: f64) -> f64 {
    if p == 2.0 {
        plancherel_norm(field)
    } else {
        lp_norm_quadrature(field, p, QUADRATURE_PAD)
    }
}

/// `‖u‖_{L²} = ((2πL)^d Σ_k |c_k|²)^{1/2}`, Euclidean across components.
pub fn plancherel_norm(field: &SpectralField) -> f64 {
    let s: f64 = field.coeffs.iter().map(|z| z.norm_sqr()).sum();
    (field.grid.volume() * s).sqrt()
}

/// Trapezoid quadrature of `|u(x)|^p` on a grid refined by `pad`, `|u|` Euclidean across components.
pub fn lp_norm_quadrature(field: &SpectralField, p: f64, pad: usize) -> f64 {
    let fine = field.grid.refined(pad);
    let fft = FftNd::new(fine);
    let mut acc = vec![0.0f64; fine.len()];
    for c in 0..field.n_comp {
        let mut buf = pad_coefficients(&field.grid, field.component(c), &fine);
        fft.inverse(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.re * z.re;
        }
    }
    let cell = fine.volume() / fine.len() as f64;
    let sum: f64 = acc.iter().map(|a| a.powf(0.5 * p)).sum();
    (cell * sum).powf(1.0 / p)
}

/// `‖Δ̇_j u‖_{L^p}` for every block of the ladder, optionally after a mode multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockNorms {
    pub j_min: i32,
    pub p: f64,
    pub values: Vec<f64>,
}

impl BlockNorms {
    pub fn get(&self, j: i32) -> f64 {
        let i = j - self.j_min;
        if i < 0 {
            return 0.0;
        }
        self.values.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.j_min + i as i32, v))
    }

    /// CSV rows `j, block_norm, 2^{sj}·block_norm`.
    pub fn to_csv(&self, s: f64) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["j", "block_norm", "weighted"]).expect("in-memory write");
        for (j, v) in self.iter() {
            w.write_record([j.to_string(), format!("{v:.17e}"), format!("{:.17e}", 2f64.powf(s * j as f64) * v)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

fn masked_block_norms(
    field: &SpectralField,
    ladder: &DyadicLadder,
    p: f64,
    mask: impl Fn(usize) -> f64,
) -> BlockNorms {
    let nb = ladder.n_blocks();
    let mut values = vec![0.0; nb];
    if p == 2.0 {
        let m = field.modes();
        for flat in 0..m {
            let mut e = 0.0;
            for c in 0..field.n_comp {
                e += field.coeffs[c * m + flat].norm_sqr();
            }
            if e == 0.0 {
                continue;
            }
            let mk = mask(flat);
            for (j, w) in ladder.weights(flat) {
                if w != 0.0 && ladder.contains(j) {
                    values[(j - ladder.j_min) as usize] += (w * mk).powi(2) * e;
                }
            }
        }
        let vol = field.grid.volume();
        for v in values.iter_mut() {
            *v = (vol * *v).sqrt();
        }
    } else {
        for (i, j) in ladder.blocks().enumerate() {
            let b = field.map_modes(|flat| ladder.weight(flat, j) * mask(flat));
            if b.coeffs.iter().any(|z| z.norm_sqr() > 0.0) {
                values[i] = lp_norm_quadrature(&b, p, QUADRATURE_PAD);
            }
        }
    }
    BlockNorms {
        j_min: ladder.j_min,
        p,
        values,
    }
}

pub fn block_norms(field: &SpectralField, ladder: &DyadicLadder, p: f64) -> BlockNorms {
    masked_block_norms(field, ladder, p, |_| 1.0)
}

/// Block norms of `u^ℓ`.
pub fn low_part_block_norms(field: &SpectralField, ladder: &DyadicLadder, p: f64) -> BlockNorms {
    masked_block_norms(field, ladder, p, |flat| ladder.low_pass(flat))
}

fn band_range(ladder: &DyadicLadder, band: Band) -> Result<(i32, i32), SpectralError> {
    let (lo, hi) = match band {
        Band::Full => (ladder.j_min, ladder.j_max),
        Band::Low => (ladder.j_min, ladder.j0),
        Band::High => (ladder.j0 - 1, ladder.j_max),
    };
    if band != Band::Full && (ladder.j0 - 1 < ladder.j_min || ladder.j0 > ladder.j_max) {
        return Err(SpectralError::BandOutOfRange(format!(
            "J0 = {} needs j_min ≤ J0−1 and J0 ≤ j_max in [{}, {}]",
            ladder.j0, ladder.j_min, ladder.j_max
        )));
    }
    Ok((lo, hi))
}

/// ℓ^r aggregation of `2^{js}·b_j` over `j ∈ [lo, hi]`.
pub fn aggregate(norms: &BlockNorms, s: f64, r: f64, lo: i32, hi: i32) -> f64 {
    let terms = (lo..=hi).map(|j| 2f64.powf(s * j as f64) * norms.get(j));
    if r.is_infinite() {
        terms.fold(0.0, f64::max)
    } else if r == 1.0 {
        terms.sum()
    } else {
        terms.map(|t| t.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// Besov norm from precomputed block norms. For the hybrid norm `low` must hold the block
/// norms of `u^ℓ` in `L^p` and `l2` those of `u` in `L²`.
pub fn besov_from_blocks(
    ladder: &DyadicLadder,
    spec: &BesovSpec,
    norms: &BlockNorms,
    low: Option<&BlockNorms>,
    l2: Option<&BlockNorms>,
) -> Result<f64, SpectralError> {
    spec.validate()?;
    match spec.hybrid {
        None => {
            let (lo, hi) = band_range(ladder, spec.band)?;
            Ok(aggregate(norms, spec.s, spec.r, lo, hi))
        }
        Some((s1, s2)) => {
            let (_, low_hi) = band_range(ladder, Band::Low)?;
            let (high_lo, high_hi) = band_range(ladder, Band::High)?;
            let low = low.ok_or_else(|| SpectralError::BandOutOfRange("hybrid norm needs u^ℓ block norms".into()))?;
            let l2 = l2.ok_or_else(|| SpectralError::BandOutOfRange("hybrid norm needs L² block norms".into()))?;
            Ok(aggregate(low, s1, 1.0, ladder.j_min, low_hi) + aggregate(l2, s2, 1.0, high_lo, high_hi))
        }
    }
}

/// `‖u‖_{Ḃ^s_{p,r}}` over the requested band, or the hybrid norm.
pub fn besov_norm(field: &SpectralField, ladder: &DyadicLadder, spec: &BesovSpec) -> Result<f64, SpectralError> {
    spec.validate()?;
    match spec.hybrid {
        None => {
            let norms = block_norms(field, ladder, spec.p);
            besov_from_blocks(ladder, spec, &norms, None, None)
        }
        Some(_) => {
            let low = low_part_block_norms(field, ladder, spec.p);
            let l2 = block_norms(field, ladder, 2.0);
            besov_from_blocks(ladder, spec, &l2, Some(&low), Some(&l2))
        }
    }
}
