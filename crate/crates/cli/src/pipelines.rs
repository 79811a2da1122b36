//! Config-driven pipelines behind each subcommand.

use anyhow::{anyhow, Result};
use hypodecay::analyze::{
    default_window, delta_report, gap_from_series, linear_rates, predictions, two_sided_check, CheminLernerAccumulator,
    ExperimentReport, NormSeries, PredictionTable,
};
use hypodecay::config::{ExperimentConfig, Kind};
use hypodecay::euler::{euler_initial_data, evolve_euler_with, symmetrize, to_system_spec};
use hypodecay::experiments::reproduce;
use hypodecay::propagate::{chapman_profile, effective_quantity, Propagator};
use hypodecay::spectral::{
    besov_norm, block_norms, estimate_decay_character, synth_with_cutoff, Band, BesovSpec, DyadicLadder,
    SpectralField,
};
use hypodecay::system::{check_sk, default_n_omega, SystemSpec};
use std::collections::BTreeMap;

/// Result of one pipeline.
pub struct Outcome {
    pub report: ExperimentReport,
    pub series: Vec<NormSeries>,
    /// Extra JSON artifacts, written as `<stem>.<name>.json`.
    pub artifacts: Vec<(String, String)>,
}

impl Outcome {
    fn new(report: ExperimentReport, series: Vec<NormSeries>) -> Self {
        Self {
            report,
            series,
            artifacts: vec![],
        }
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: {}",
            self.report.experiment,
            if self.report.pass { "PASS" } else { "FAIL" }
        );
        for r in &self.report.reports {
            s += &format!(
                "\n  {}: fitted {:.4}, predicted {}, verdict {:?}",
                r.label,
                r.fitted_rate,
                r.predicted_rate.map_or("-".into(), |p| format!("{p:.4}")),
                r.verdict
            );
        }
        for g in &self.report.gaps {
            s += &format!("\n  {} gap {:.4} (threshold {:.4})", g.label, g.slope_gap, g.threshold);
        }
        for (k, v) in &self.report.metrics {
            s += &format!("\n  {k} = {v:.6e}");
        }
        s
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.kind.ok_or_else(|| anyhow!("config has no kind"))? {
        Kind::Check => check(cfg),
        Kind::Synth => synth(cfg),
        Kind::RunLinear => linear(cfg, Mode::Plain),
        Kind::Decay => linear(cfg, Mode::Decay),
        Kind::Profile => linear(cfg, Mode::Profile),
        Kind::RunEuler => euler(cfg, false),
        Kind::DeltaV => euler(cfg, true),
        Kind::Reproduce => {
            let name = cfg.name.as_deref().ok_or_else(|| anyhow!("reproduce needs a name"))?;
            let out = reproduce(name, cfg.seed)?;
            Ok(Outcome::new(out.report, out.series))
        }
    }
}

fn base_report(cfg: &ExperimentConfig, system: &str) -> Result<ExperimentReport> {
    Ok(ExperimentReport {
        experiment: cfg.kind.map_or("run", |k| k.as_str()).into(),
        system: system.into(),
        grid: cfg.grid()?,
        ladder: cfg.ladder_summary()?,
        predictions: None,
        reports: vec![],
        gaps: vec![],
        metrics: BTreeMap::new(),
        notes: vec![format!("seed = {}", cfg.seed)],
        pass: true,
    })
}

fn check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sys = cfg.resolve_system()?;
    let sk = check_sk(&sys, default_n_omega(sys.d), 121)?;
    let mut rep = base_report(cfg, &sys.name)?;
    rep.pass = sk.passes;
    rep.metrics.insert("kernel_margin".into(), sk.kernel_margin);
    rep.metrics.insert("max_re_lambda".into(), sk.max_re_lambda);
    rep.metrics.insert("ellipticity_min".into(), sk.ellipticity_min);
    rep.metrics.insert("dissipation_c".into(), sk.dissipation_c);
    rep.metrics.insert("lambda0".into(), sk.lambda0);
    let sk_json = serde_json::to_string_pretty(&sk)?;
    println!("{sk_json}");
    let mut out = Outcome::new(rep, vec![]);
    out.artifacts.push(("sk".into(), sk_json));
    Ok(out)
}

fn synth(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ladder = cfg.ladder()?;
    let sigma1 = cfg.sigma1()?;
    let f = synth_with_cutoff(ladder.grid, sigma1, cfg.p, cfg.seed, cfg.synth, cfg.cutoff)?;
    let est = estimate_decay_character(&f, &ladder, cfg.p)?;
    let mut rep = base_report(cfg, "scalar")?;
    rep.pass = (est.sigma1_hat - sigma1).abs() <= 0.05;
    rep.metrics.insert("sigma1".into(), sigma1);
    rep.metrics.insert("sigma1_hat".into(), est.sigma1_hat);
    rep.metrics.insert("c_lower".into(), est.c_lower);
    rep.metrics.insert("c_upper".into(), est.c_upper);
    rep.metrics.insert("gap_m".into(), est.gap_m as f64);
    let mut out = Outcome::new(rep, vec![]);
    out.artifacts.push(("blocks".into(), serde_json::to_string_pretty(&block_norms(&f, &ladder, cfg.p))?));
    out.artifacts.push(("field".into(), serde_json::to_string(&f)?));
    Ok(out)
}

/// Conservative components with decay character `σ₁`, dissipative ones with `σ₁ + 1`.
fn initial_data(cfg: &ExperimentConfig, sys: &SystemSpec, ladder: &DyadicLadder) -> Result<SpectralField> {
    let sigma1 = cfg.sigma1()?;
    let mut field: Option<SpectralField> = None;
    for c in 0..sys.n() {
        let s = if c < sys.n1 { sigma1 } else { sigma1 + 1.0 };
        let f = synth_with_cutoff(ladder.grid, s, cfg.p, cfg.seed.wrapping_add(c as u64), cfg.synth, cfg.cutoff)?;
        field = Some(match field {
            None => f,
            Some(acc) => acc.concat(&f),
        });
    }
    Ok(field.expect("systems have components"))
}

fn norm_specs(cfg: &ExperimentConfig) -> Vec<(f64, BesovSpec)> {
    cfg.norms
        .iter()
        .map(|&s| (s, BesovSpec::new(s, cfg.p, 1.0, Band::Full)))
        .collect()
}

/// Records `‖PV‖` and `‖{I−P}V‖` in every configured norm.
struct Recorder {
    specs: Vec<(f64, BesovSpec)>,
    n1: usize,
    n: usize,
    cols: Vec<Vec<f64>>,
}

impl Recorder {
    fn new(cfg: &ExperimentConfig, n1: usize, n: usize) -> Self {
        let specs = norm_specs(cfg);
        let cols = vec![vec![]; 2 * specs.len()];
        Self { specs, n1, n, cols }
    }

    fn push(&mut self, f: &SpectralField, ladder: &DyadicLadder) -> Result<()> {
        for (k, (_, spec)) in self.specs.iter().enumerate() {
            self.cols[2 * k].push(besov_norm(&f.select(0..self.n1), ladder, spec)?);
            self.cols[2 * k + 1].push(besov_norm(&f.select(self.n1..self.n), ladder, spec)?);
        }
        Ok(())
    }

    fn series(self, prefix: &str, times: &[f64], p: f64) -> Result<Vec<NormSeries>> {
        let mut out = vec![];
        for (k, (s, _)) in self.specs.iter().enumerate() {
            for (j, part) in ["P", "(I-P)"].iter().enumerate() {
                out.push(NormSeries::new(
                    format!("|{part}{prefix}|_B^{s}_{{{p},1}}"),
                    times.to_vec(),
                    self.cols[2 * k + j].clone(),
                )?);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Plain,
    Decay,
    Profile,
}

fn window(cfg: &ExperimentConfig, times: &[f64]) -> (f64, f64) {
    cfg.window
        .unwrap_or_else(|| default_window(cfg.blocks().map_or(-2, |b| b.0), *times.last().expect("times nonempty")))
}

fn table(cfg: &ExperimentConfig, d: usize) -> Option<PredictionTable> {
    predictions(cfg.sigma1().ok()?, d, cfg.p).ok()
}

fn linear(cfg: &ExperimentConfig, mode: Mode) -> Result<Outcome> {
    let sys = cfg.resolve_system()?;
    let ladder = cfg.ladder()?;
    let v0 = initial_data(cfg, &sys, &ladder)?;
    let times = cfg.times();
    let mut rec = Recorder::new(cfg, sys.n1, sys.n());
    let mut gaps = Recorder::new(cfg, sys.n1, sys.n());
    let psi0 = effective_quantity(&sys, &v0)?;
    let mut failure = None;
    Propagator::new(&sys, ladder.grid)?.evolve_with(&v0, &times, |i, f| {
        let step = rec.push(f, &ladder).and_then(|_| {
            if mode == Mode::Profile {
                let diff = f.sub(&chapman_profile(&sys, &psi0, times[i])?)?;
                gaps.push(&diff, &ladder)?;
            }
            Ok(())
        });
        if let Err(e) = step {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let sigma1 = cfg.sigma1()?;
    let mut rep = base_report(cfg, &sys.name)?;
    rep.predictions = table(cfg, sys.d);
    let mut series = rec.series("V", &times, cfg.p)?;
    let w = window(cfg, &times);
    rep.notes.push(format!("fit window [{}, {}]", w.0, w.1));
    match mode {
        Mode::Plain => {}
        Mode::Decay => {
            for (k, &s) in cfg.norms.iter().enumerate() {
                let (rp, rd) = linear_rates(sigma1, s);
                for (j, rate) in [rp, rd].into_iter().enumerate() {
                    let r = two_sided_check(&series[2 * k + j], rate, w, cfg.tol, cfg.ratio_cap)?;
                    rep.pass &= r.passed();
                    rep.reports.push(r);
                }
            }
        }
        Mode::Profile => {
            let diffs = gaps.series("(V-V*)", &times, cfg.p)?;
            for (k, &s) in cfg.norms.iter().enumerate() {
                let stars = [
                    rep.predictions.and_then(|t| t.sigma1_star(s)),
                    rep.predictions.and_then(|t| t.sigma2_star(s)),
                ];
                for (j, star) in stars.into_iter().enumerate() {
                    let threshold = star.map_or(0.0, |x| -0.5 * x + 0.1);
                    let g = gap_from_series(&series[2 * k + j], &diffs[2 * k + j], threshold, w)?;
                    if star.is_some() {
                        rep.pass &= g.pass;
                    } else {
                        rep.notes.push(format!("{}: no predicted gain at this index, not scored", g.label));
                    }
                    rep.gaps.push(g);
                }
            }
            series.extend(diffs);
        }
    }
    Ok(Outcome::new(rep, series))
}

fn euler(cfg: &ExperimentConfig, delta: bool) -> Result<Outcome> {
    let ecfg = cfg.euler()?;
    let ladder = cfg.ladder()?;
    let c = ecfg.c_star();
    let sys = to_system_spec(&ecfg);
    let f0 = euler_initial_data(&ecfg, cfg.sigma1()?, cfg.seed, cfg.cutoff)?;
    let v0 = symmetrize(&f0, c);
    let times = cfg.times();
    let n = sys.n();
    let prop = if delta { Some(Propagator::new(&sys, ladder.grid)?) } else { None };
    let mut rec = Recorder::new(cfg, 1, n);
    let mut lin = Recorder::new(cfg, 1, n);
    let mut dv = Recorder::new(cfg, 1, n);
    let mut cl = CheminLernerAccumulator::new(&ladder, cfg.p, 1);
    let mut failure = None;
    let stats = evolve_euler_with(&ecfg, &f0, &times, |i, f| {
        let v = symmetrize(f, c);
        let step = (|| -> Result<()> {
            rec.push(&v, &ladder)?;
            cl.push(times[i], &v)?;
            if let Some(prop) = &prop {
                let vl = prop.evolve(&v0, &times[i..=i])?.remove(0);
                lin.push(&vl, &ladder)?;
                dv.push(&v.sub(&vl)?, &ladder)?;
            }
            Ok(())
        })();
        if let Err(e) = step {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut rep = base_report(cfg, &sys.name)?;
    rep.predictions = table(cfg, sys.d);
    rep.metrics.insert("steps".into(), stats.steps as f64);
    rep.metrics.insert("min_density".into(), stats.min_density);
    rep.metrics.insert("max_courant".into(), stats.max_courant);
    rep.metrics.insert("epsilon".into(), ecfg.epsilon);
    let mut series = rec.series("V", &times, cfg.p)?;
    if let Ok(cl) = cl.finish() {
        rep.metrics.insert("e_tilde_growth".into(), cl.growth());
        let (t, e, d) = (&cl.times, &cl.e_tilde, &cl.d_norm);
        let skip = usize::from(t[0] == 0.0);
        series.push(NormSeries::new("E_tilde", t[skip..].to_vec(), e[skip..].to_vec())?);
        series.push(NormSeries::new("D", t[skip..].to_vec(), d[skip..].to_vec())?);
    } else {
        rep.notes.push("fewer than 20 snapshots: Chemin-Lerner norms skipped".into());
    }
    if delta {
        let w = window(cfg, &times);
        rep.notes.push(format!("fit window [{}, {}]", w.0, w.1));
        let linear = lin.series("V_L", &times, cfg.p)?;
        let deltas = dv.series("dV", &times, cfg.p)?;
        for (k, &s) in cfg.norms.iter().enumerate() {
            let predicted = [
                rep.predictions.and_then(|t| t.conservative_delta_rate(s)),
                rep.predictions.and_then(|t| t.dissipative_delta_rate(s)),
            ];
            for j in 0..2 {
                let reference = linear[2 * k + j].values.iter().cloned().fold(0.0, f64::max);
                let r = delta_report(deltas[2 * k + j].clone(), reference, predicted[j], w, cfg.tol)?;
                rep.pass &= !matches!(r.verdict, hypodecay::analyze::Verdict::Fail { .. });
                rep.reports.push(r);
            }
        }
        series.extend(linear);
        series.extend(deltas);
    }
    Ok(Outcome::new(rep, series))
}
