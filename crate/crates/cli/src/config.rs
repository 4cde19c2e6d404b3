use std::fs;
use std::path::{Path, PathBuf};

use adeim_core::driver::{RunConfig, Strategy};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Commented copy of [`ConfigFile::default`], printed by `adeim defaults`.
pub const DEFAULT_TOML: &str = include_str!("../default.toml");

/// Which artifacts a run writes next to its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: PathBuf,
    /// Recorded states as a binary matrix (`states.bin`).
    pub states: bool,
    /// Probe time series (`probe.csv`).
    pub probe: bool,
    /// Per-step error ratios of reduced runs (`error.csv`).
    pub error: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            states: true,
            probe: true,
            error: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub run: RunConfig,
    pub output: OutputSettings,
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: ConfigFile,
}

impl ConfigFile {
    /// Reads a TOML config, or the `config` entry of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.to_path_buf(),
            source,
        })?;
        let invalid = |message: String| CliError::InvalidConfig {
            path: path.to_path_buf(),
            message,
        };
        if path.extension().is_some_and(|e| e == "json") {
            let m: ManifestConfig =
                serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
            Ok(m.config)
        } else {
            toml::from_str(&text).map_err(|e| invalid(e.to_string()))
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Injection parameter μ
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Grid points per field (the state has twice as many entries)
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of time steps K
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Store every n-th state
    #[arg(long, global = true)]
    pub record_stride: Option<usize>,
    /// Reduced dimension
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Full-model steps before the reduced model takes over
    #[arg(long, global = true)]
    pub w_init: Option<usize>,
    /// Number of samples in the adaptation window
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Number of interpolation points
    #[arg(long, global = true)]
    pub interpolation_points: Option<usize>,
    /// Fraction of the state sampled on update steps
    #[arg(long, global = true)]
    pub sampling_frac: Option<f64>,
    /// Sampling points are recomputed every this many steps
    #[arg(long, global = true)]
    pub update_freq: Option<usize>,
    /// Predictor substeps per reduced step
    #[arg(long, global = true)]
    pub c_tau: Option<usize>,
    #[arg(long, global = true)]
    pub strategy: Option<Strategy>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ConfigFile) {
        let run = &mut cfg.run;
        if let Some(v) = &self.out {
            cfg.output.dir = v.clone();
        }
        if let Some(v) = self.mu {
            run.model.mu = v;
        }
        if let Some(v) = self.grid_points {
            run.grid_points = v;
        }
        if let Some(v) = self.seed {
            run.seed = v;
        }
        if let Some(v) = self.steps {
            run.time.num_steps = v;
        }
        if let Some(v) = self.dt {
            run.time.dt = v;
        }
        if let Some(v) = self.record_stride {
            run.record_stride = v;
        }
        if let Some(v) = self.n {
            run.rom.n = v;
        }
        if let Some(v) = self.w_init {
            run.rom.w_init = v;
        }
        if let Some(v) = self.window {
            run.rom.w = v;
        }
        if let Some(v) = self.interpolation_points {
            run.rom.interpolation_points = Some(v);
        }
        if let Some(v) = self.sampling_frac {
            run.rom.sampling_fraction = v;
            run.rom.sampling_points = None;
        }
        if let Some(v) = self.update_freq {
            run.rom.z = v;
        }
        if let Some(v) = self.c_tau {
            run.rom.c_tau = v;
        }
        if let Some(v) = self.strategy {
            run.rom.strategy = v;
        }
    }
}
