//! Experiment configuration, read from a JSON file.
//!
//! Only `seed` is mandatory; every other field falls back to the default
//! working point (two-sided Pareto with alpha = 1.5, symmetric tails).

use std::path::{Path, PathBuf};

use bpre_core::bpre::OffspringFamily;
use bpre_core::{LawSpec, Normalization};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Theorem1,
    Theorem3,
    Theorem5,
    Overshoot,
    Contrast,
    Rwre,
    Oracle,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Theorem1 => "theorem1",
            Self::Theorem3 => "theorem3",
            Self::Theorem5 => "theorem5",
            Self::Overshoot => "overshoot",
            Self::Contrast => "contrast",
            Self::Rwre => "rwre",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default = "default_law")]
    pub law: LawSpec,
    /// Heavy-tailed comparison law of the contrast experiment.
    #[serde(default = "default_law")]
    pub heavy_law: LawSpec,
    #[serde(default = "default_offspring")]
    pub offspring: OffspringFamily,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    /// Levels `x` of the events `Z > e^{x c_n}`.
    #[serde(default = "default_x_grid")]
    pub x_grid: Vec<f64>,
    /// Small-`x` window of the sudden-extinction check.
    #[serde(default = "default_window_grid")]
    pub window_grid: Vec<f64>,
    #[serde(default = "default_uv_grid")]
    pub u_grid: Vec<f64>,
    #[serde(default = "default_uv_grid")]
    pub v_grid: Vec<f64>,
    /// Absolute population sizes `N` of the contrast experiment.
    #[serde(default = "default_size_grid")]
    pub size_grid: Vec<f64>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// Sample counts. `samples` is the main budget of each experiment: walks,
/// environments or excursions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    pub samples: u64,
    /// Accepted meander samples behind each reference curve, or environments
    /// of the annealed cross-check in the RWRE experiment.
    pub reference_samples: u64,
    /// Environments per `n` on the heavy-tailed side of the contrast.
    pub heavy_samples: u64,
    /// Length and accepted samples of the meander behind the tilt constant.
    pub ase_n: usize,
    pub ase_samples: u64,
    pub identity_excursions: u64,
    pub step_cap: u64,
    pub keep_fraction: f64,
    pub prune_log_a: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            samples: 200_000,
            reference_samples: 50_000,
            heavy_samples: 200_000,
            ase_n: 2000,
            ase_samples: 20_000,
            identity_excursions: 10_000,
            step_cap: 10_000_000,
            keep_fraction: 1.0,
            prune_log_a: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem; the experiment name when empty.
    pub stem: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), stem: String::new() }
    }
}

/// Pass/fail limits. The convergence rates behind the limit theorems are
/// unknown, so these are engineering choices that travel with the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Agreement of two Monte Carlo estimates, in combined standard errors.
    pub z_max: f64,
    pub slope_tol: f64,
    pub hazard_tol: f64,
    pub hazard_min_n: usize,
    pub ks_endpoint: f64,
    pub ks_marginal: f64,
    pub ess_min: f64,
    pub ase_rel_tol: f64,
    pub contrast_size: f64,
    pub contrast_max: f64,
    pub heavy_x: f64,
    pub heavy_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            z_max: 3.0,
            slope_tol: 0.15,
            hazard_tol: 0.1,
            hazard_min_n: 200,
            ks_endpoint: 0.08,
            ks_marginal: 0.10,
            ess_min: 1000.0,
            ase_rel_tol: 0.1,
            contrast_size: 1000.0,
            contrast_max: 0.05,
            heavy_x: 0.5,
            heavy_min: 0.1,
        }
    }
}

fn default_law() -> LawSpec {
    LawSpec::Pareto2 { alpha: 1.5, p: 0.5, xmin: 1.0 }
}

fn default_offspring() -> OffspringFamily {
    OffspringFamily::Geometric
}

fn default_n_grid() -> Vec<usize> {
    vec![50, 100, 200, 400, 800]
}

fn default_t_grid() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

fn default_x_grid() -> Vec<f64> {
    (1..=150).map(|i| i as f64 * 0.02).collect()
}

fn default_window_grid() -> Vec<f64> {
    vec![0.1, 0.2, 0.4]
}

fn default_uv_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_size_grid() -> Vec<f64> {
    vec![10.0, 100.0, 1000.0]
}

fn default_replicas() -> usize {
    8
}

impl ExperimentConfig {
    /// Built-in configuration with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "seed": seed })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError(format!("malformed config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grids: [(&str, bool); 8] = [
            ("n_grid", self.n_grid.is_empty()),
            ("t_grid", self.t_grid.is_empty()),
            ("x_grid", self.x_grid.is_empty()),
            ("window_grid", self.window_grid.is_empty()),
            ("u_grid", self.u_grid.is_empty()),
            ("v_grid", self.v_grid.is_empty()),
            ("size_grid", self.size_grid.is_empty()),
            ("replicas", self.replicas == 0),
        ];
        if let Some((name, _)) = grids.iter().find(|g| g.1) {
            return Err(ConfigError(format!("`{name}` must be nonempty")));
        }
        if self.n_grid.contains(&0) {
            return Err(ConfigError("`n_grid` entries must be positive".into()));
        }
        if self.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(ConfigError("`t_grid` entries must lie in [0, 1]".into()));
        }
        let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite());
        for (name, grid) in [
            ("x_grid", &self.x_grid),
            ("window_grid", &self.window_grid),
            ("u_grid", &self.u_grid),
            ("v_grid", &self.v_grid),
            ("size_grid", &self.size_grid),
        ] {
            if !positive(grid) {
                return Err(ConfigError(format!("`{name}` entries must be positive")));
            }
        }
        let b = &self.budget;
        if b.samples == 0 || b.reference_samples == 0 || b.heavy_samples == 0 || b.ase_samples == 0 || b.ase_n == 0 {
            return Err(ConfigError("budget counts must be positive".into()));
        }
        if !(b.keep_fraction > 0.0 && b.keep_fraction <= 1.0) {
            return Err(ConfigError("`keep_fraction` must lie in (0, 1]".into()));
        }
        for law in [&self.law, &self.heavy_law] {
            law.build().map_err(|e| ConfigError(format!("bad law {law:?}: {e}")))?;
        }
        if let OffspringFamily::Fixed { probs } = &self.offspring {
            bpre_core::bpre::OffspringLaw::finite(probs.clone()).map_err(|e| ConfigError(format!("bad offspring law: {e}")))?;
        }
        Ok(())
    }

    /// Sorted copy of `x_grid`.
    pub fn sorted_x(&self) -> Vec<f64> {
        sorted(&self.x_grid)
    }

    pub fn stem(&self, experiment: Experiment) -> String {
        if self.output.stem.is_empty() {
            experiment.name().to_string()
        } else {
            self.output.stem.clone()
        }
    }
}

pub(crate) fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
