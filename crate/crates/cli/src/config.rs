use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gppopf::acopf::OracleConfig;
use gppopf::gpr::FitOptions;
use gppopf::popf::SampleDistribution;
use serde::{Deserialize, Serialize};

/// GP optimizer settings; the restart seed comes from the experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSettings {
    pub restarts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for GpSettings {
    fn default() -> Self {
        let d = FitOptions::default();
        GpSettings {
            restarts: d.restarts,
            max_iter: d.max_iter,
            grad_tol: d.grad_tol,
        }
    }
}

impl GpSettings {
    pub fn fit_options(&self, seed: u64) -> FitOptions {
        FitOptions {
            restarts: self.restarts,
            seed,
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
        }
    }
}

fn default_train() -> SampleDistribution {
    SampleDistribution::LatinHypercube
}

fn default_test() -> SampleDistribution {
    SampleDistribution::UniformBox
}

fn default_bins() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// MATPOWER file, or `builtin:<name>` for a bundled case. Relative paths
    /// resolve against the config file's directory.
    pub case_path: String,
    #[serde(default)]
    pub renewable_buses: Vec<u32>,
    /// Total renewable capacity as % of base-case load; required with renewables.
    #[serde(default)]
    pub penetration_target: Option<f64>,
    pub load_fraction: f64,
    pub renewable_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default = "default_train")]
    pub train_distribution: SampleDistribution,
    #[serde(default = "default_test")]
    pub test_distribution: SampleDistribution,
    pub seed: u64,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub gp: GpSettings,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// Artifact directory when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("parsing experiment config")
    }

    /// Load a config file, resolving relative paths inside it against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_json(&text).with_context(|| format!("in {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(dir);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        if !self.case_path.starts_with("builtin:") && Path::new(&self.case_path).is_relative() {
            self.case_path = dir.join(&self.case_path).to_string_lossy().into_owned();
        }
        for d in [&mut self.train_distribution, &mut self.test_distribution] {
            if let SampleDistribution::EmpiricalFile { path } = d {
                if path.is_relative() {
                    *path = dir.join(&*path);
                }
            }
        }
    }

    /// Checks that need no solver work.
    pub fn validate(&self) -> Result<()> {
        if self.n_train < 2 {
            bail!("n_train must be at least 2, got {}", self.n_train);
        }
        if self.n_test < 1 {
            bail!("n_test must be at least 1, got {}", self.n_test);
        }
        for (name, f) in [
            ("load_fraction", self.load_fraction),
            ("renewable_fraction", self.renewable_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                bail!("{name} must lie in [0, 1], got {f}");
            }
        }
        match (self.renewable_buses.is_empty(), self.penetration_target) {
            (false, None) => bail!("penetration_target is required when renewable_buses is set"),
            (_, Some(p)) if p.is_nan() || p < 0.0 || p.is_infinite() => {
                bail!("penetration_target must be nonnegative, got {p}")
            }
            _ => {}
        }
        if self.histogram_bins == 0 {
            bail!("histogram_bins must be positive");
        }
        if self.gp.restarts == 0 {
            bail!("gp.restarts must be positive");
        }
        if !self.case_path.starts_with("builtin:") && !Path::new(&self.case_path).exists() {
            bail!("case file {} does not exist", self.case_path);
        }
        for d in [&self.train_distribution, &self.test_distribution] {
            if let SampleDistribution::EmpiricalFile { path } = d {
                if !path.exists() {
                    bail!("empirical distribution file {} does not exist", path.display());
                }
            }
        }
        Ok(())
    }
}
