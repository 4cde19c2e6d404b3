use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lookahead::{PredictorConfig, DEFAULT_GUARD};
use crate::models::{Grid1D, ModelError, NewtonOptions, RdeParams, TimeGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Where the data samples of the adaptation window come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Predictor integrated one step into the future.
    #[default]
    Lookahead,
    /// Full-model residual at the current lifted state.
    Lookback,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lookahead" => Ok(Self::Lookahead),
            "lookback" => Ok(Self::Lookback),
            other => Err(format!("unknown strategy `{other}` (expected lookahead or lookback)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lookahead => "lookahead",
            Self::Lookback => "lookback",
        })
    }
}

/// Parameters of the adaptive reduced model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdeimSettings {
    /// Reduced dimension.
    pub n: usize,
    /// Full-model steps taken before the reduced model starts.
    pub w_init: usize,
    /// Data-window length.
    pub w: usize,
    /// Sampling points as a fraction of the full dimension, rounded up.
    pub sampling_fraction: f64,
    /// Explicit sampling-point count; overrides `sampling_fraction`.
    pub sampling_points: Option<usize>,
    /// Interpolation points of the reduced solve; defaults to `2n`, capped at `N`.
    pub interpolation_points: Option<usize>,
    /// Sampling points are recomputed every `z` steps.
    pub z: usize,
    pub c_tau: usize,
    pub predictor_guard: f64,
    pub strategy: Strategy,
    /// Keep the predictor state in the reduced space on ordinary steps.
    pub projected_lookahead: bool,
    pub newton: NewtonOptions,
}

impl Default for AdeimSettings {
    fn default() -> Self {
        Self {
            n: 9,
            w_init: 500,
            w: 5,
            sampling_fraction: 0.5,
            sampling_points: None,
            interpolation_points: None,
            z: 3,
            c_tau: 5,
            predictor_guard: DEFAULT_GUARD,
            strategy: Strategy::Lookahead,
            projected_lookahead: false,
            newton: NewtonOptions::default(),
        }
    }
}

/// Settings with every count fixed for a particular full dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSettings {
    pub n: usize,
    pub w_init: usize,
    pub w: usize,
    pub m_s: usize,
    pub m: usize,
    pub z: usize,
    pub strategy: Strategy,
    pub projected_lookahead: bool,
    pub predictor: PredictorConfig,
    pub newton: NewtonOptions,
}

impl AdeimSettings {
    pub fn sampling_count(&self, dim: usize) -> usize {
        match self.sampling_points {
            Some(m_s) => m_s,
            None => (self.sampling_fraction * dim as f64).ceil() as usize,
        }
    }

    /// Checks the settings against a full dimension and step count.
    pub fn resolve(&self, dim: usize, num_steps: usize) -> Result<ResolvedSettings, ConfigError> {
        if self.n == 0 {
            return Err(invalid("n", "reduced dimension must be positive"));
        }
        if self.n > dim {
            return Err(invalid("n", format!("{} exceeds the full dimension {dim}", self.n)));
        }
        if self.w_init == 0 {
            return Err(invalid("w_init", "must be positive"));
        }
        if self.n > self.w_init {
            return Err(invalid("n", format!("{} exceeds w_init = {}", self.n, self.w_init)));
        }
        if self.w_init >= num_steps {
            return Err(invalid(
                "w_init",
                format!("{} leaves no reduced steps with num_steps = {num_steps}", self.w_init),
            ));
        }
        if self.w == 0 {
            return Err(invalid("w", "window length must be positive"));
        }
        if self.z == 0 {
            return Err(invalid("z", "update frequency must be positive"));
        }
        if self.sampling_points.is_none()
            && !(self.sampling_fraction > 0.0 && self.sampling_fraction <= 1.0)
        {
            return Err(invalid(
                "sampling_fraction",
                format!("{} is outside (0, 1]", self.sampling_fraction),
            ));
        }
        let m_s = self.sampling_count(dim);
        if m_s < self.n || m_s > dim {
            return Err(invalid(
                "sampling_points",
                format!("{m_s} is outside [n, N] = [{}, {dim}]", self.n),
            ));
        }
        let m = self
            .interpolation_points
            .unwrap_or_else(|| (2 * self.n).min(dim));
        if m < self.n || m > dim {
            return Err(invalid(
                "interpolation_points",
                format!("{m} is outside [n, N] = [{}, {dim}]", self.n),
            ));
        }
        let predictor = PredictorConfig {
            c_tau: self.c_tau,
            guard: self.predictor_guard,
        };
        predictor
            .validate()
            .map_err(|e| invalid("c_tau", e.to_string()))?;
        if !(self.predictor_guard > 0.0) {
            return Err(invalid("predictor_guard", "must be positive"));
        }
        if !(self.newton.tol > 0.0) || self.newton.max_iter == 0 {
            return Err(invalid("newton", "tolerance and iteration cap must be positive"));
        }
        Ok(ResolvedSettings {
            n: self.n,
            w_init: self.w_init,
            w: self.w,
            m_s,
            m,
            z: self.z,
            strategy: self.strategy,
            projected_lookahead: self.projected_lookahead,
            predictor,
            newton: self.newton,
        })
    }
}

/// Everything needed to reproduce one run on the detonation-wave model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Grid points per field; the full dimension is twice this.
    pub grid_points: usize,
    /// Seeds the optional initial-condition perturbation.
    pub seed: u64,
    /// Amplitude of a uniform random perturbation of the initial η; zero by default.
    pub perturbation: f64,
    /// Every `record_stride`-th state is kept in stored trajectories.
    pub record_stride: usize,
    /// Probe location in `[0, 2π)`.
    pub probe_x: f64,
    pub model: RdeParams,
    pub time: TimeGrid,
    pub rom: AdeimSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_points: 1024,
            seed: 0,
            perturbation: 0.0,
            record_stride: 100,
            probe_x: 0.5 * std::f64::consts::PI,
            model: RdeParams::default(),
            time: TimeGrid::default(),
            rom: AdeimSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid1D, ConfigError> {
        Ok(Grid1D::new(self.grid_points)?)
    }

    pub fn full_dim(&self) -> usize {
        2 * self.grid_points
    }

    /// Validates the parts shared by full-order and adaptive runs.
    pub fn validate_full(&self) -> Result<(), ConfigError> {
        self.grid()?;
        self.model.validate()?;
        self.time.validate()?;
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be positive"));
        }
        if !(0.0..2.0 * std::f64::consts::PI).contains(&self.probe_x) {
            return Err(invalid("probe_x", format!("{} is outside [0, 2π)", self.probe_x)));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(invalid("perturbation", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<ResolvedSettings, ConfigError> {
        self.validate_full()?;
        self.rom.resolve(self.full_dim(), self.time.num_steps)
    }
}
