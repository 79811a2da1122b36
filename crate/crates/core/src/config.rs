//! Experiment configuration in TOML.

use crate::euler::EulerConfig;
use crate::propagate::geometric;
use crate::spectral::{fit_j_min, make_ladder, DyadicLadder, GridConfig, LadderSummary, SpectralError, SynthMode};
use crate::system::{fixtures, SystemError, SystemSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("system file {0} does not exist")]
    MissingSystemFile(PathBuf),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Check,
    Synth,
    RunLinear,
    RunEuler,
    Decay,
    Profile,
    DeltaV,
    Reproduce,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Check => "check",
            Kind::Synth => "synth",
            Kind::RunLinear => "run-linear",
            Kind::RunEuler => "run-euler",
            Kind::Decay => "decay",
            Kind::Profile => "profile",
            Kind::DeltaV => "delta-v",
            Kind::Reproduce => "reproduce",
        }
    }
}

/// Output times: an explicit list or `count` geometric points in `[start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Times {
    List(Vec<f64>),
    Geometric { start: f64, end: f64, count: usize },
}

impl Times {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Times::List(v) => v.clone(),
            Times::Geometric { start, end, count } => geometric(*start, *end, *count),
        }
    }
}

impl Default for Times {
    fn default() -> Self {
        Times::Geometric {
            start: 0.5,
            end: 1000.0,
            count: 48,
        }
    }
}

/// One experiment. Unset fields take the defaults below; the grid dimension comes from the
/// system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    /// Canned experiment for `reproduce`.
    pub name: Option<String>,
    /// Builtin name or path to a system file.
    #[serde(default = "default_system")]
    pub system: String,
    pub d: Option<usize>,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(rename = "L_box", default = "default_box")]
    pub box_scale: f64,
    pub j0: Option<i32>,
    pub j_min: Option<i32>,
    pub j_max: Option<i32>,
    pub sigma1: Option<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Regularity indices `σ` of the `Ḃ^σ_{p,1}` norms to record.
    #[serde(default = "default_norms")]
    pub norms: Vec<f64>,
    #[serde(default)]
    pub times: Times,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub out: Option<PathBuf>,
    #[serde(default = "one")]
    pub rho_bar: f64,
    #[serde(rename = "K", default = "default_k")]
    pub k_pressure: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Radial cutoff of synthesized data.
    #[serde(default = "one")]
    pub cutoff: f64,
    #[serde(default = "default_synth")]
    pub synth: SynthMode,
    /// Fit window; defaults to `[max(10, 5/4^{J0}), T_end/2]`.
    pub window: Option<(f64, f64)>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_ratio_cap")]
    pub ratio_cap: f64,
}

fn default_system() -> String {
    "euler1d".into()
}
fn default_n() -> usize {
    1024
}
fn default_box() -> f64 {
    256.0
}
fn default_p() -> f64 {
    2.0
}
fn default_norms() -> Vec<f64> {
    vec![0.0]
}
fn default_seed() -> u64 {
    1
}
fn one() -> f64 {
    1.0
}
fn default_k() -> f64 {
    1.0 / 1.4
}
fn default_gamma() -> f64 {
    1.4
}
fn default_epsilon() -> f64 {
    1e-2
}
fn default_synth() -> SynthMode {
    SynthMode::Radial
}
fn default_tol() -> f64 {
    crate::analyze::DEFAULT_TOL
}
fn default_ratio_cap() -> f64 {
    crate::analyze::DEFAULT_RATIO_CAP
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.into(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builtin system, or the system file named by `system`.
    pub fn resolve_system(&self) -> Result<SystemSpec, ConfigError> {
        match fixtures::builtin(&self.system) {
            Ok(s) => Ok(s),
            Err(SystemError::UnknownBuiltin(_)) => {
                let path = Path::new(&self.system);
                if !path.exists() {
                    return Err(ConfigError::MissingSystemFile(path.into()));
                }
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                    path: path.into(),
                    reason: e.to_string(),
                })?;
                Ok(SystemSpec::from_toml_str(&text)?)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Spatial dimension: `d` if given, else the system's.
    pub fn dimension(&self) -> Result<usize, ConfigError> {
        match self.d {
            Some(d) => Ok(d),
            None => Ok(self.resolve_system()?.d),
        }
    }

    pub fn grid(&self) -> Result<GridConfig, ConfigError> {
        Ok(GridConfig::new(self.dimension()?, self.n, self.box_scale)?)
    }

    /// Block range `(j0, j_min, j_max)`: unset ends take the widest range the grid resolves and
    /// `J0` defaults to −2 clamped into it.
    pub fn blocks(&self) -> Result<(i32, i32, i32), ConfigError> {
        let grid = self.grid()?;
        let j_min = self
            .j_min
            .unwrap_or_else(|| (grid.fundamental() / 0.75).log2().ceil() as i32);
        let j_max = self
            .j_max
            .unwrap_or_else(|| (grid.nyquist() * 3.0 / 8.0).log2().floor() as i32);
        let j0 = self.j0.unwrap_or((-2).clamp(j_min + 1, j_max.max(j_min + 1)));
        Ok((j0, j_min, j_max))
    }

    pub fn ladder_summary(&self) -> Result<LadderSummary, ConfigError> {
        let (j0, j_min, j_max) = self.blocks()?;
        Ok(LadderSummary {
            j_min,
            j_max,
            j0,
            fit_j_min: fit_j_min(&self.grid()?),
        })
    }

    pub fn ladder(&self) -> Result<DyadicLadder, ConfigError> {
        let (j0, j_min, j_max) = self.blocks()?;
        Ok(make_ladder(self.grid()?, j0, j_min, j_max)?)
    }

    /// Decay character; defaults to `−d/p`.
    pub fn sigma1(&self) -> Result<f64, ConfigError> {
        Ok(self.sigma1.unwrap_or(-(self.dimension()? as f64) / self.p))
    }

    pub fn euler(&self) -> Result<EulerConfig, ConfigError> {
        let grid = self.grid()?;
        let cfg = EulerConfig {
            d: grid.d,
            rho_bar: self.rho_bar,
            k_pressure: self.k_pressure,
            gamma: self.gamma,
            grid,
            epsilon: self.epsilon,
        };
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn times(&self) -> Vec<f64> {
        self.times.values()
    }

    /// Checks every precondition the pipelines rely on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.kind == Some(Kind::Reproduce) {
            return match &self.name {
                Some(_) => Ok(()),
                None => bad("reproduce needs `name`".into()),
            };
        }
        let sys = self.resolve_system()?;
        if let Some(d) = self.d {
            if d != sys.d {
                return bad(format!("d = {d} but system {} has d = {}", sys.name, sys.d));
            }
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p = {} not in (1, ∞)", self.p));
        }
        let times = self.times();
        if times.is_empty()
            || times.iter().any(|t| !(*t >= 0.0 && t.is_finite()))
            || times.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("times must be nonnegative, finite and strictly increasing".into());
        }
        if self.norms.iter().any(|s| !s.is_finite()) {
            return bad("norm indices must be finite".into());
        }
        if !self.sigma1()?.is_finite() {
            return bad("sigma1 must be finite".into());
        }
        if !(self.cutoff > 0.0) || !(self.tol > 0.0) || !(self.ratio_cap >= 1.0) {
            return bad("need cutoff > 0, tol > 0, ratio_cap >= 1".into());
        }
        if let Some((a, b)) = self.window {
            if !(a < b) {
                return bad(format!("window [{a}, {b}] is empty"));
            }
        }
        if self.kind != Some(Kind::Check) {
            self.ladder()?;
        }
        Ok(())
    }
}
