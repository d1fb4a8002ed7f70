//! JSON run configuration.
//!
//! A config parses and validates completely before any solver runs. Unknown
//! keys are rejected at every level.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wdro::measures::{load_empirical, read_samples_csv};
use wdro::{CostSpec, DiscreteMeasure, Grid, Norm, Objective, PhiSpec, ProblemSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// `[lo, hi]` per axis.
    pub bounds: Vec<[f64; 2]>,
    /// Optional; must equal `bounds.len()` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub points_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionConfig {
    Uniform,
    /// Point mass at the grid point nearest to `point`.
    Dirac { point: Vec<f64> },
    /// One weight per grid point, normalized to sum to one.
    Weights { weights: Vec<f64> },
    /// Samples snapped to the grid.
    Samples { points: Vec<Vec<f64>> },
    /// Samples read from a headerless CSV file, one row per sample. Relative
    /// paths resolve against the config file's directory.
    Csv { path: PathBuf },
    /// Random weights drawn from the config seed; each point is kept with
    /// probability `density`.
    Random {
        #[serde(default = "default_density")]
        density: f64,
    },
}

fn default_density() -> f64 {
    0.7
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub norm: Norm,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

/// `"auto"` calibrates sigma by halving until `E_{pi0} c <= rho / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSetting {
    Auto(AutoKeyword),
    Fixed(f64),
}

impl Default for SigmaSetting {
    fn default() -> Self {
        SigmaSetting::Auto(AutoKeyword::Auto)
    }
}

impl std::str::FromStr for SigmaSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(SigmaSetting::default());
        }
        s.parse::<f64>()
            .map(SigmaSetting::Fixed)
            .map_err(|_| format!("expected a number or `auto`, got `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegConfig {
    #[serde(default)]
    pub eps: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub sigma: SigmaSetting,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Unreg,
    CostReg,
    #[default]
    Entropic,
    Phi,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Unreg => "unreg",
            Method::CostReg => "cost-reg",
            Method::Entropic => "entropic",
            Method::Phi => "phi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub eps: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub delta: Vec<f64>,
}

fn default_deltas() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub distribution: DistributionConfig,
    pub objective: Objective,
    pub cost: CostConfig,
    pub rho: f64,
    #[serde(default)]
    pub reg: RegConfig,
    #[serde(default)]
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_output() -> PathBuf {
    PathBuf::from("wdro-out")
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub sigma: Option<SigmaSetting>,
    pub phi: Option<PhiSpec>,
    pub rho: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub eps_list: Option<Vec<f64>>,
    pub delta_list: Option<Vec<f64>>,
}

fn config_err(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {reason}"))
}

fn nonneg(key: &str, v: f64) -> Result<(), CliError> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(config_err(key, format!("must be a finite number >= 0, got {v}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config; relative CSV paths are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let DistributionConfig::Csv { path: csv } = &mut cfg.distribution {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(m) = o.method {
            self.method = m;
        }
        if let Some(v) = o.eps {
            self.reg.eps = v;
        }
        if let Some(v) = o.delta {
            self.reg.delta = v;
        }
        if let Some(v) = o.sigma {
            self.reg.sigma = v;
        }
        if let Some(v) = o.phi {
            self.phi = Some(v);
        }
        if let Some(v) = o.rho {
            self.rho = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.output {
            self.output = v.clone();
        }
        if o.eps_list.is_some() || o.delta_list.is_some() {
            let base = self.sweep.clone().unwrap_or(SweepConfig {
                eps: Vec::new(),
                delta: default_deltas(),
            });
            self.sweep = Some(SweepConfig {
                eps: o.eps_list.clone().unwrap_or(base.eps),
                delta: o.delta_list.clone().unwrap_or(base.delta),
            });
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.domain;
        if d.bounds.is_empty() || d.bounds.len() > 2 {
            return Err(config_err("domain.bounds", "need one or two axes"));
        }
        if let Some(dim) = d.dim {
            if dim != d.bounds.len() {
                return Err(config_err("domain.dim", format!("{dim} disagrees with {} bounds", d.bounds.len())));
            }
        }
        for b in &d.bounds {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(config_err("domain.bounds", format!("[{}, {}] is not an interval", b[0], b[1])));
            }
        }
        if d.points_per_axis < 2 {
            return Err(config_err("domain.points_per_axis", "must be >= 2"));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(config_err("rho", format!("must be > 0, got {}", self.rho)));
        }
        if !(self.cost.p.is_finite() && self.cost.p >= 1.0) {
            return Err(config_err("cost.p", format!("must be >= 1, got {}", self.cost.p)));
        }
        nonneg("reg.eps", self.reg.eps)?;
        nonneg("reg.delta", self.reg.delta)?;
        if let SigmaSetting::Fixed(s) = self.reg.sigma {
            if !(s.is_finite() && s > 0.0) {
                return Err(config_err("reg.sigma", format!("must be > 0 or \"auto\", got {s}")));
            }
        }
        if matches!(self.method, Method::Entropic | Method::Phi) && self.reg.eps + self.reg.delta <= 0.0 {
            return Err(config_err("reg", format!("method `{}` needs eps + delta > 0", self.method.name())));
        }
        if self.method == Method::Phi && self.phi.is_none() {
            return Err(config_err("phi", "method `phi` needs `phi`: \"kl\" or \"chi2\""));
        }
        if let DistributionConfig::Random { density } = self.distribution {
            if !(density > 0.0 && density <= 1.0) {
                return Err(config_err("distribution.density", format!("must lie in (0, 1], got {density}")));
            }
        }
        if let Some(s) = &self.sweep {
            for &e in &s.eps {
                nonneg("sweep.eps", e)?;
            }
            for &v in &s.delta {
                nonneg("sweep.delta", v)?;
            }
            if s.eps.iter().any(|&e| e == 0.0) && s.delta.iter().any(|&v| v == 0.0) {
                return Err(config_err("sweep", "every (eps, delta) pair needs eps + delta > 0"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>, CliError> {
        let bounds = self.domain.bounds.iter().map(|b| (b[0], b[1])).collect();
        Ok(Arc::new(Grid::new(bounds, self.domain.points_per_axis)?))
    }

    pub fn cost_spec(&self) -> Result<CostSpec, CliError> {
        Ok(CostSpec::new(self.cost.norm, self.cost.p)?)
    }

    pub fn distribution(&self, grid: &Arc<Grid>) -> Result<DiscreteMeasure, CliError> {
        let g = Arc::clone(grid);
        Ok(match &self.distribution {
            DistributionConfig::Uniform => DiscreteMeasure::uniform(g),
            DistributionConfig::Dirac { point } => {
                if point.len() != grid.dim() {
                    return Err(config_err("distribution.point", "dimension differs from the domain"));
                }
                let i = grid
                    .nearest_index(point)
                    .ok_or_else(|| config_err("distribution.point", "lies outside the domain"))?;
                DiscreteMeasure::dirac(g, i)
            }
            DistributionConfig::Weights { weights } => DiscreteMeasure::normalized(g, weights.clone())?,
            DistributionConfig::Samples { points } => load_empirical(g, points)?,
            DistributionConfig::Csv { path } => {
                let file = std::fs::File::open(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                let rows = read_samples_csv(file, grid.dim())?;
                load_empirical(g, &rows)?
            }
            DistributionConfig::Random { density } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let n = grid.len();
                let mut w: Vec<f64> = (0..n)
                    .map(|_| if rng.gen_bool(*density) { rng.gen_range(0.05..1.0) } else { 0.0 })
                    .collect();
                if w.iter().all(|&v| v == 0.0) {
                    w[rng.gen_range(0..n)] = 1.0;
                }
                DiscreteMeasure::normalized(g, w)?
            }
        })
    }

    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let grid = self.grid()?;
        let p = self.distribution(&grid)?;
        let f = self.objective.evaluate(&grid)?;
        Ok(ProblemSpec::new(p, f, self.cost_spec()?, self.rho)?)
    }
}
