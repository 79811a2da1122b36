//! Rate fits, two-sided envelope checks, predicted exponents, profile and δV comparisons,
//! Chemin–Lerner time norms, and JSON reports.

use crate::spectral::{
    besov_from_blocks, besov_norm, block_norms, low_part_block_norms, BesovSpec, BlockNorms, DyadicLadder,
    GridConfig, LadderSummary, SpectralError, SpectralField,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Range;
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 0.07;
pub const DEFAULT_RATIO_CAP: f64 = 5.0;
pub const MIN_FIT_SAMPLES: usize = 8;
pub const MIN_CL_SNAPSHOTS: usize = 20;
/// δV norms below this fraction of the reference norms are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyzeError {
    #[error("{have} samples in the fit window, need at least {need}")]
    InsufficientSamples { have: usize, need: usize },
    #[error("nonpositive value {value} at t = {t}")]
    NonpositiveValue { t: f64, value: f64 },
    #[error("sigma1 = {sigma1} outside [{lo}, {hi})")]
    SigmaOutOfRange { sigma1: f64, lo: f64, hi: f64 },
    #[error("time grids differ")]
    MismatchedTimes,
    #[error("{0} snapshots, need at least {MIN_CL_SNAPSHOTS}")]
    SparseTrajectory(usize),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// A labelled norm time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl NormSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self, AnalyzeError> {
        if times.len() != values.len() {
            return Err(AnalyzeError::InvalidSeries(format!(
                "{} times, {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(AnalyzeError::InvalidSeries("times must increase".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AnalyzeError::InvalidSeries("values must be finite and nonnegative".into()));
        }
        Ok(Self {
            label: label.into(),
            times,
            values,
        })
    }

    /// Applies `norm` to every snapshot.
    pub fn from_trajectory(
        label: impl Into<String>,
        times: &[f64],
        traj: &[SpectralField],
        norm: impl Fn(&SpectralField) -> Result<f64, SpectralError>,
    ) -> Result<Self, AnalyzeError> {
        if times.len() != traj.len() {
            return Err(AnalyzeError::MismatchedTimes);
        }
        let values = traj.iter().map(norm).collect::<Result<Vec<_>, _>>()?;
        Self::new(label, times.to_vec(), values)
    }

    /// Samples with `t` in `[lo, hi]`.
    pub fn window(&self, (lo, hi): (f64, f64)) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.values)
            .filter(move |(t, _)| **t >= lo && **t <= hi)
            .map(|(t, v)| (*t, *v))
    }

    /// CSV rows `t, norm_name, value`.
    pub fn to_csv(&self) -> String {
        series_csv(std::slice::from_ref(self))
    }
}

/// Long-format CSV (`t, norm_name, value`) for several series.
pub fn series_csv(series: &[NormSeries]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "norm_name", "value"]).expect("in-memory write");
    for s in series {
        for (t, v) in s.times.iter().zip(&s.values) {
            w.write_record([format!("{t:.17e}"), s.label.clone(), format!("{v:.17e}")])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub r_squared: f64,
    pub n: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    LineFit {
        slope,
        intercept,
        residual: (ss_res / n).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 },
        n: xs.len(),
    }
}

fn window_logs(series: &NormSeries, window: (f64, f64), log_t: bool) -> Result<(Vec<f64>, Vec<f64>), AnalyzeError> {
    let mut xs = vec![];
    let mut ys = vec![];
    for (t, v) in series.window(window) {
        if !(v > 0.0) {
            return Err(AnalyzeError::NonpositiveValue { t, value: v });
        }
        if log_t && !(t > 0.0) {
            return Err(AnalyzeError::NonpositiveValue { t, value: t });
        }
        xs.push(if log_t { t.ln() } else { t });
        ys.push(v.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(AnalyzeError::InsufficientSamples {
            have: xs.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    Ok((xs, ys))
}

/// Ordinary least squares of `ln value` against `ln t` over the window.
pub fn fit_decay(series: &NormSeries, window: (f64, f64)) -> Result<LineFit, AnalyzeError> {
    let (xs, ys) = window_logs(series, window, true)?;
    Ok(fit_line(&xs, &ys))
}

/// Least squares of `ln value` against `t` (exponential decay).
pub fn fit_exponential(series: &NormSeries, window: (f64, f64)) -> Result<LineFit, AnalyzeError> {
    let (xs, ys) = window_logs(series, window, false)?;
    Ok(fit_line(&xs, &ys))
}

/// Outcome of a rate check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail { reasons: Vec<String> },
    /// The series sits at round-off level and was not fitted.
    BelowNoiseFloor,
    /// No predicted rate applies; the fit is informational.
    NoPrediction,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub label: String,
    pub series: NormSeries,
    pub predicted_rate: Option<f64>,
    pub fitted_rate: f64,
    pub residual: f64,
    pub c_lower: f64,
    #[serde(rename = "C_upper")]
    pub c_upper: f64,
    pub window: (f64, f64),
    pub tol: f64,
    pub ratio_cap: f64,
    pub verdict: Verdict,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    /// `C_upper / c_lower`.
    pub fn envelope_ratio(&self) -> f64 {
        self.c_upper / self.c_lower
    }
}

/// Fits the window and compares both the slope and the envelope `t^{−predicted}·value`
/// against the tolerances.
pub fn two_sided_check(
    series: &NormSeries,
    predicted_rate: f64,
    window: (f64, f64),
    tol: f64,
    ratio_cap: f64,
) -> Result<DecayReport, AnalyzeError> {
    let fit = fit_decay(series, window)?;
    let (c_lower, c_upper) = envelope(series, predicted_rate, window);
    let mut reasons = vec![];
    if (fit.slope - predicted_rate).abs() > tol {
        reasons.push(format!(
            "slope {:.4} differs from {:.4} by more than {tol}",
            fit.slope, predicted_rate
        ));
    }
    if c_upper / c_lower > ratio_cap {
        reasons.push(format!("envelope ratio {:.3} exceeds {ratio_cap}", c_upper / c_lower));
    }
    Ok(DecayReport {
        label: series.label.clone(),
        series: series.clone(),
        predicted_rate: Some(predicted_rate),
        fitted_rate: fit.slope,
        residual: fit.residual,
        c_lower,
        c_upper,
        window,
        tol,
        ratio_cap,
        verdict: if reasons.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail { reasons }
        },
    })
}

fn envelope(series: &NormSeries, rate: f64, window: (f64, f64)) -> (f64, f64) {
    series.window(window).fold((f64::INFINITY, 0.0), |(lo, hi), (t, v)| {
        let e = v * t.powf(-rate);
        (lo.min(e), hi.max(e))
    })
}

/// Default fit window `[max(10, 5/λ_eff²), T_end/2]` with `λ_eff = 2^{J0}`.
pub fn default_window(j0: i32, t_end: f64) -> (f64, f64) {
    (f64::max(10.0, 5.0 / 4f64.powi(j0)), 0.5 * t_end)
}

/// Linear rates valid in every dimension: `−(σ − σ₁)/2` for `‖PV‖_{Ḃ^σ}` and
/// `−(σ − σ₁)/2 − 1/2` for `‖{I−P}V‖_{Ḃ^σ}`.
pub fn linear_rates(sigma1: f64, sigma: f64) -> (f64, f64) {
    let r = -0.5 * (sigma - sigma1);
    (r, r - 0.5)
}

/// Predicted exponents for data with decay character `σ₁` in `Ḃ^{σ₁}_{p,∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub sigma1: f64,
    pub d: usize,
    pub p: f64,
    pub eps1: f64,
    pub alpha_star: f64,
    pub beta_star: f64,
}

/// `α*`, `ε₁ = min(0.1, (d/p − 1 − σ₁)/2)` and `β*` for `−d/p ≤ σ₁ < d/p − 1`.
pub fn predictions(sigma1: f64, d: usize, p: f64) -> Result<PredictionTable, AnalyzeError> {
    let dp = d as f64 / p;
    if !(sigma1 >= -dp && sigma1 < dp - 1.0) {
        return Err(AnalyzeError::SigmaOutOfRange {
            sigma1,
            lo: -dp,
            hi: dp - 1.0,
        });
    }
    let eps1 = f64::min(0.1, 0.5 * (dp - 1.0 - sigma1));
    let alpha_star = if sigma1 < dp - 2.0 { 1.0 } else { dp - 1.0 - sigma1 - eps1 };
    let beta_star = 0.5 * (dp + 1.0 - sigma1 - 0.5 * alpha_star - eps1);
    Ok(PredictionTable {
        sigma1,
        d,
        p,
        eps1,
        alpha_star,
        beta_star,
    })
}

impl PredictionTable {
    fn dp(&self) -> f64 {
        self.d as f64 / self.p
    }

    /// `σ₁*(σ)`, defined for `σ₁ < σ ≤ d/p + 1 − α*`.
    pub fn sigma1_star(&self, sigma: f64) -> Option<f64> {
        let dp = self.dp();
        if sigma > self.sigma1 && sigma <= dp - 1.0 {
            Some(self.alpha_star)
        } else if sigma > dp - 1.0 && sigma <= dp + 1.0 - self.alpha_star {
            Some(0.5 * self.alpha_star)
        } else {
            None
        }
    }

    /// `σ₂*(σ′)`, defined for `σ₁ + 1 < σ′ ≤ d/p − α*`.
    pub fn sigma2_star(&self, sigma_p: f64) -> Option<f64> {
        let dp = self.dp();
        if sigma_p > self.sigma1 + 1.0 && sigma_p <= dp - 2.0 {
            Some(self.alpha_star)
        } else if sigma_p > dp - 2.0 && sigma_p <= dp - self.alpha_star {
            Some(0.5 * self.alpha_star)
        } else {
            None
        }
    }

    /// Rate of `‖PV‖_{Ḃ^σ}`: `−(σ − σ₁)/2`.
    pub fn conservative_rate(&self, sigma: f64) -> f64 {
        linear_rates(self.sigma1, sigma).0
    }

    /// Rate of `‖{I−P}V‖_{Ḃ^{σ′}}`: `−(σ′ − σ₁)/2 − 1/2`.
    pub fn dissipative_rate(&self, sigma_p: f64) -> f64 {
        linear_rates(self.sigma1, sigma_p).1
    }

    /// Rate of `‖P(V−V*)‖_{Ḃ^σ}`.
    pub fn conservative_profile_rate(&self, sigma: f64) -> Option<f64> {
        let dp = self.dp();
        if sigma > self.sigma1 && sigma <= dp - 1.0 {
            Some(-0.5 * (sigma - self.sigma1 + self.alpha_star))
        } else if sigma > dp - 1.0 && sigma <= dp + 1.0 - self.alpha_star {
            Some(-0.5 * (sigma - self.sigma1 + 0.5 * self.alpha_star))
        } else {
            None
        }
    }

    /// Rate of `‖{I−P}(V−V*)‖_{Ḃ^{σ′}}`.
    pub fn dissipative_profile_rate(&self, sigma_p: f64) -> Option<f64> {
        let dp = self.dp();
        if sigma_p > self.sigma1 + 1.0 && sigma_p <= dp - 2.0 {
            Some(-0.5 * (sigma_p - self.sigma1 + 1.0 + self.alpha_star))
        } else if sigma_p > dp - 2.0 && sigma_p <= dp - self.alpha_star {
            Some(-0.5 * (sigma_p - self.sigma1 + 1.0 + 0.5 * self.alpha_star))
        } else {
            None
        }
    }

    /// Rate of `‖PδV‖_{Ḃ^σ}`: `−(σ − σ₁ + σ₁*)/2`.
    pub fn conservative_delta_rate(&self, sigma: f64) -> Option<f64> {
        self.sigma1_star(sigma).map(|s| -0.5 * (sigma - self.sigma1 + s))
    }

    /// Rate of `‖{I−P}δV‖_{Ḃ^{σ′}}`: `−(σ′ − σ₁ + 1 + σ₂*)/2`.
    pub fn dissipative_delta_rate(&self, sigma_p: f64) -> Option<f64> {
        self.sigma2_star(sigma_p).map(|s| -0.5 * (sigma_p - self.sigma1 + 1.0 + s))
    }
}

/// Slope comparison between `‖V‖` and `‖V − V*‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub label: String,
    pub slope_v: f64,
    /// Fitted slope of `‖V − V*‖`; `None` when that series vanishes identically.
    pub slope_diff: Option<f64>,
    /// `slope_diff − slope_v`.
    pub slope_gap: f64,
    pub threshold: f64,
    pub window: (f64, f64),
    pub degenerate: bool,
    pub pass: bool,
}

/// Compares the fitted rate of `‖component(V − V*)‖` with that of `‖component(V)‖`.
///
/// Passes iff `slope_gap ≤ threshold`. A difference series that is identically zero is
/// reported as degenerate and does not pass.
#[allow(clippy::too_many_arguments)]
pub fn profile_gap(
    label: &str,
    times: &[f64],
    traj: &[SpectralField],
    profile: &[SpectralField],
    component: Range<usize>,
    ladder: &DyadicLadder,
    spec: &BesovSpec,
    threshold: f64,
    window: (f64, f64),
) -> Result<GapReport, AnalyzeError> {
    if traj.len() != times.len() || profile.len() != times.len() {
        return Err(AnalyzeError::MismatchedTimes);
    }
    let mut v = Vec::with_capacity(times.len());
    let mut gap = Vec::with_capacity(times.len());
    for (a, b) in traj.iter().zip(profile) {
        let comp = a.select(component.clone());
        v.push(besov_norm(&comp, ladder, spec)?);
        gap.push(besov_norm(&comp.sub(&b.select(component.clone()))?, ladder, spec)?);
    }
    let series_v = NormSeries::new(label, times.to_vec(), v)?;
    let series_gap = NormSeries::new(format!("{label} gap"), times.to_vec(), gap)?;
    gap_from_series(&series_v, &series_gap, threshold, window)
}

/// [`profile_gap`] on precomputed series.
pub fn gap_from_series(
    v: &NormSeries,
    diff: &NormSeries,
    threshold: f64,
    window: (f64, f64),
) -> Result<GapReport, AnalyzeError> {
    if v.times != diff.times {
        return Err(AnalyzeError::MismatchedTimes);
    }
    let slope_v = fit_decay(v, window)?.slope;
    let degenerate = diff.window(window).all(|(_, x)| x == 0.0);
    let slope_diff = if degenerate { None } else { Some(fit_decay(diff, window)?.slope) };
    let slope_gap = slope_diff.map_or(0.0, |s| s - slope_v);
    Ok(GapReport {
        label: v.label.clone(),
        slope_v,
        slope_diff,
        slope_gap,
        threshold,
        window,
        degenerate,
        pass: !degenerate && slope_gap <= threshold,
    })
}

/// One norm to evaluate on a δV trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaNorm {
    pub label: String,
    pub component: Range<usize>,
    pub spec: BesovSpec,
    pub predicted_rate: Option<f64>,
}

/// Rates of `‖δV‖` with `δV = V − V_L` for each requested norm.
///
/// A series whose values stay below [`NOISE_FLOOR`] times the matching `‖V_L‖` is flagged
/// instead of fitted. With a prediction the verdict is the slope check alone (`tol`).
pub fn delta_v_report(
    times: &[f64],
    nonlinear: &[SpectralField],
    linear: &[SpectralField],
    ladder: &DyadicLadder,
    norms: &[DeltaNorm],
    window: (f64, f64),
    tol: f64,
) -> Result<Vec<DecayReport>, AnalyzeError> {
    if nonlinear.len() != times.len() || linear.len() != times.len() {
        return Err(AnalyzeError::MismatchedTimes);
    }
    let mut reports = Vec::with_capacity(norms.len());
    for spec in norms {
        let mut dv = Vec::with_capacity(times.len());
        let mut reference = 0.0f64;
        for (a, b) in nonlinear.iter().zip(linear) {
            let delta = a.sub(b)?.select(spec.component.clone());
            dv.push(besov_norm(&delta, ladder, &spec.spec)?);
            reference = reference.max(besov_norm(&b.select(spec.component.clone()), ladder, &spec.spec)?);
        }
        let series = NormSeries::new(spec.label.clone(), times.to_vec(), dv)?;
        reports.push(delta_report(series, reference, spec.predicted_rate, window, tol)?);
    }
    Ok(reports)
}

/// Report for one δV series, given the largest norm of the linear reference.
pub fn delta_report(
    series: NormSeries,
    reference: f64,
    predicted: Option<f64>,
    window: (f64, f64),
    tol: f64,
) -> Result<DecayReport, AnalyzeError> {
    let have = series.window(window).count();
    if have < MIN_FIT_SAMPLES {
        return Err(AnalyzeError::InsufficientSamples {
            have,
            need: MIN_FIT_SAMPLES,
        });
    }
    let peak = series.window(window).fold(0.0f64, |m, (_, v)| m.max(v));
    let blank = |verdict| DecayReport {
        label: series.label.clone(),
        series: series.clone(),
        predicted_rate: predicted,
        fitted_rate: 0.0,
        residual: 0.0,
        c_lower: 0.0,
        c_upper: 0.0,
        window,
        tol,
        ratio_cap: f64::MAX,
        verdict,
    };
    if peak <= NOISE_FLOOR * reference {
        return Ok(blank(Verdict::BelowNoiseFloor));
    }
    let fit = fit_decay(&series, window)?;
    let mut report = blank(Verdict::NoPrediction);
    report.fitted_rate = fit.slope;
    report.residual = fit.residual;
    let (lo, hi) = envelope(&series, predicted.unwrap_or(fit.slope), window);
    report.c_lower = lo;
    report.c_upper = hi;
    if let Some(p) = predicted {
        report.verdict = if fit.slope <= p + tol {
            Verdict::Pass
        } else {
            Verdict::Fail {
                reasons: vec![format!("slope {:.4} slower than predicted {p:.4} beyond {tol}", fit.slope)],
            }
        };
    }
    Ok(report)
}

/// Cumulative Chemin–Lerner diagnostics at each snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheminLerner {
    pub times: Vec<f64>,
    /// `Ẽ_p(T)`: per-block sup over `[t₀, T]`, then hybrid sum.
    pub e_tilde: Vec<f64>,
    /// `D_p(T)`: per-block trapezoid integral over `[t₀, T]`, then hybrid sum.
    pub d_norm: Vec<f64>,
}

impl CheminLerner {
    /// `max_T Ẽ_p(T) / Ẽ_p(t₀)`.
    pub fn growth(&self) -> f64 {
        self.e_tilde.iter().fold(0.0f64, |m, e| m.max(*e)) / self.e_tilde[0]
    }
}

/// Per-block running sup and time integral of hybrid block norms for one component group.
#[derive(Debug, Clone)]
struct BlockAccumulator {
    low_sup: Vec<f64>,
    high_sup: Vec<f64>,
    low_int: Vec<f64>,
    high_int: Vec<f64>,
    last: Option<(f64, BlockNorms, BlockNorms)>,
}

impl BlockAccumulator {
    fn new(nb: usize) -> Self {
        Self {
            low_sup: vec![0.0; nb],
            high_sup: vec![0.0; nb],
            low_int: vec![0.0; nb],
            high_int: vec![0.0; nb],
            last: None,
        }
    }

    fn push(&mut self, t: f64, low: BlockNorms, high: BlockNorms) {
        for i in 0..self.low_sup.len() {
            self.low_sup[i] = self.low_sup[i].max(low.values[i]);
            self.high_sup[i] = self.high_sup[i].max(high.values[i]);
        }
        if let Some((t0, l0, h0)) = &self.last {
            let dt = t - t0;
            for i in 0..self.low_int.len() {
                self.low_int[i] += 0.5 * dt * (l0.values[i] + low.values[i]);
                self.high_int[i] += 0.5 * dt * (h0.values[i] + high.values[i]);
            }
        }
        self.last = Some((t, low, high));
    }
}

/// Streaming evaluation of `Ẽ_p` and `D_p`; the component split is `P = first n1 components`.
pub struct CheminLernerAccumulator<'a> {
    ladder: &'a DyadicLadder,
    p: f64,
    n1: usize,
    cons: BlockAccumulator,
    diss: BlockAccumulator,
    out: CheminLerner,
}

impl<'a> CheminLernerAccumulator<'a> {
    pub fn new(ladder: &'a DyadicLadder, p: f64, n1: usize) -> Self {
        let nb = ladder.n_blocks();
        Self {
            ladder,
            p,
            n1,
            cons: BlockAccumulator::new(nb),
            diss: BlockAccumulator::new(nb),
            out: CheminLerner {
                times: vec![],
                e_tilde: vec![],
                d_norm: vec![],
            },
        }
    }

    pub fn push(&mut self, t: f64, field: &SpectralField) -> Result<(), AnalyzeError> {
        if self.out.times.last().is_some_and(|&last| t <= last) {
            return Err(AnalyzeError::MismatchedTimes);
        }
        let d = field.grid.d as f64;
        let dp = d / self.p;
        let high_s = d / 2.0 + 1.0;
        let parts = [
            (field.select(0..self.n1), &mut self.cons),
            (field.select(self.n1..field.n_comp), &mut self.diss),
        ];
        for (part, acc) in parts {
            acc.push(
                t,
                low_part_block_norms(&part, self.ladder, self.p),
                block_norms(&part, self.ladder, 2.0),
            );
        }
        let ladder = self.ladder;
        let hybrid = |acc: &BlockAccumulator, sup: bool, s1: f64| -> Result<f64, SpectralError> {
            let wrap = |v: &Vec<f64>, p| BlockNorms {
                j_min: ladder.j_min,
                p,
                values: v.clone(),
            };
            let (low, high) = if sup {
                (wrap(&acc.low_sup, self.p), wrap(&acc.high_sup, 2.0))
            } else {
                (wrap(&acc.low_int, self.p), wrap(&acc.high_int, 2.0))
            };
            besov_from_blocks(ladder, &BesovSpec::hybrid(s1, high_s, self.p), &high, Some(&low), Some(&high))
        };
        let e = hybrid(&self.cons, true, dp - 1.0)? + hybrid(&self.diss, true, dp)?;
        let dn = hybrid(&self.cons, false, dp + 1.0)? + hybrid(&self.diss, false, dp)?;
        self.out.times.push(t);
        self.out.e_tilde.push(e);
        self.out.d_norm.push(dn);
        Ok(())
    }

    pub fn finish(self) -> Result<CheminLerner, AnalyzeError> {
        if self.out.times.len() < MIN_CL_SNAPSHOTS {
            return Err(AnalyzeError::SparseTrajectory(self.out.times.len()));
        }
        Ok(self.out)
    }
}

/// `Ẽ_p(T)` and `D_p(T)` at every snapshot of a trajectory.
pub fn chemin_lerner_norms(
    times: &[f64],
    traj: &[SpectralField],
    ladder: &DyadicLadder,
    p: f64,
    n1: usize,
) -> Result<CheminLerner, AnalyzeError> {
    if times.len() != traj.len() {
        return Err(AnalyzeError::MismatchedTimes);
    }
    if times.len() < MIN_CL_SNAPSHOTS {
        return Err(AnalyzeError::SparseTrajectory(times.len()));
    }
    let mut acc = CheminLernerAccumulator::new(ladder, p, n1);
    for (t, f) in times.iter().zip(traj) {
        acc.push(*t, f)?;
    }
    acc.finish()
}

/// Top-level JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub system: String,
    pub grid: GridConfig,
    pub ladder: LadderSummary,
    pub predictions: Option<PredictionTable>,
    pub reports: Vec<DecayReport>,
    #[serde(default)]
    pub gaps: Vec<GapReport>,
    /// Scalar diagnostics (fitted constants, R², λ₀, ...).
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_series(c: f64, rate: f64, n: usize) -> NormSeries {
        let times: Vec<f64> = (0..n).map(|k| 10f64 * 1.2f64.powi(k as i32)).collect();
        let values = times.iter().map(|t| c * t.powf(rate)).collect();
        NormSeries::new("x", times, values).unwrap()
    }

    #[test]
    fn exact_power_law() {
        let s = power_series(1.0, -0.5, 20);
        let f = fit_decay(&s, (0.0, f64::INFINITY)).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && f.residual < 1e-12);
    }

    #[test]
    fn perturbed_power_law() {
        let times: Vec<f64> = (0..40).map(|k| 10f64 * 1.15f64.powi(k)).collect();
        let values = times.iter().map(|t| 3.0 * t.powf(-0.75) * (1.0 + 0.01 * t.ln().sin())).collect();
        let s = NormSeries::new("x", times, values).unwrap();
        let f = fit_decay(&s, (0.0, f64::INFINITY)).unwrap();
        assert!((-0.76..=-0.74).contains(&f.slope));
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let s = power_series(2.0, 0.0, 10);
        assert_eq!(fit_decay(&s, (0.0, f64::INFINITY)).unwrap().slope, 0.0);
    }

    #[test]
    fn fit_errors() {
        let s = power_series(1.0, -1.0, 5);
        assert_eq!(
            fit_decay(&s, (0.0, 1e9)).unwrap_err(),
            AnalyzeError::InsufficientSamples { have: 5, need: 8 }
        );
        let mut s = power_series(1.0, -1.0, 10);
        s.values[3] = 0.0;
        assert!(matches!(fit_decay(&s, (0.0, 1e9)), Err(AnalyzeError::NonpositiveValue { .. })));
    }

    #[test]
    fn exponential_decay_fails_power_law_check() {
        let times: Vec<f64> = (0..30).map(|k| 1.0 + k as f64).collect();
        let values = times.iter().map(|t| (-0.3 * t).exp()).collect();
        let s = NormSeries::new("exp", times, values).unwrap();
        let r = two_sided_check(&s, -0.5, (1.0, 30.0), 0.07, 5.0).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn prediction_examples() {
        let t = predictions(-1.0, 2, 2.0).unwrap();
        assert!((t.eps1 - 0.1).abs() < 1e-15 && (t.alpha_star - 0.9).abs() < 1e-15);
        assert!(matches!(predictions(-1.5, 2, 2.0), Err(AnalyzeError::SigmaOutOfRange { .. })));
        assert_eq!(predictions(-1.0, 3, 2.0).unwrap().alpha_star, 1.0);
        // d = 1, p = 2 leaves [−1/2, −1/2) empty.
        assert!(predictions(-0.5, 1, 2.0).is_err());
    }

    #[test]
    fn degenerate_and_zero_profiles() {
        let v = power_series(1.0, -0.5, 12);
        let zero = NormSeries::new("z", v.times.clone(), vec![0.0; 12]).unwrap();
        let g = gap_from_series(&v, &zero, -0.3, (0.0, 1e9)).unwrap();
        assert!(g.degenerate && !g.pass);
        let g = gap_from_series(&v, &v, -0.3, (0.0, 1e9)).unwrap();
        assert!(!g.degenerate && g.slope_gap == 0.0 && !g.pass);
    }

    #[test]
    fn noise_floor_is_flagged() {
        let s = power_series(1e-20, -0.5, 12);
        let r = delta_report(s.clone(), 1.0, Some(-1.0), (0.0, 1e9), 0.07).unwrap();
        assert_eq!(r.verdict, Verdict::BelowNoiseFloor);
        assert!(matches!(
            delta_report(s, 1.0, None, (1e8, 1e9), 0.07),
            Err(AnalyzeError::InsufficientSamples { have: 0, .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fit_is_invariant_under_rescaling(c in 1e-6f64..1e6, rate in -3.0f64..1.0, lambda in 1e-3f64..1e3) {
                let s = power_series(c, rate, 16);
                let scaled = NormSeries::new("y", s.times.clone(), s.values.iter().map(|v| v * lambda).collect()).unwrap();
                let a = fit_decay(&s, (0.0, f64::INFINITY)).unwrap();
                let b = fit_decay(&scaled, (0.0, f64::INFINITY)).unwrap();
                prop_assert!((a.slope - b.slope).abs() < 1e-9);
                prop_assert!((a.slope - rate).abs() < 1e-9);
            }

            #[test]
            fn predictions_respect_branches(d in 2usize..4, p in 1.5f64..4.0, u in 0.0f64..1.0) {
                let dp = d as f64 / p;
                prop_assume!(dp - 1.0 > -dp + 1e-6);
                let sigma1 = -dp + u * (2.0 * dp - 1.0) * 0.999;
                let t = predictions(sigma1, d, p).unwrap();
                prop_assert!(t.eps1 > 0.0 && t.eps1 < dp - 1.0 - sigma1);
                prop_assert!(t.alpha_star > 0.0 && t.alpha_star <= 1.0);
                if sigma1 < dp - 2.0 {
                    prop_assert_eq!(t.alpha_star, 1.0);
                } else {
                    prop_assert!((t.alpha_star - (dp - 1.0 - sigma1 - t.eps1)).abs() < 1e-14);
                }
                // Profile rates are strictly faster than the plain conservative rate.
                let sigma = sigma1 + 0.5 * (dp + 1.0 - t.alpha_star - sigma1);
                let r = t.conservative_profile_rate(sigma).unwrap();
                prop_assert!(r < t.conservative_rate(sigma));
                prop_assert!(t.conservative_delta_rate(sigma).unwrap() < t.conservative_rate(sigma));
                prop_assert!(t.sigma1_star(sigma1).is_none());
            }
        }
    }
}
