use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{AdeimSettings, ConfigError, RunConfig};
use super::metrics::{max_eta, probe_index, ErrorAccumulator, Field};
use super::solver::{run_adeim_with, AdeimSolver};
use crate::models::{
    fom_trajectory, rde_initial_condition, Dynamics, FomError, FomStepper, RdeModel,
};
use crate::trajectory::{Diagnostics, Recorder, RunFailure, Timings, Trajectory};
use crate::Real;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Fom(#[from] FomError),
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

/// Detonation-wave model and initial condition described by `cfg`.
pub fn build_model<T: Real>(cfg: &RunConfig) -> Result<(RdeModel<T>, DVector<T>), ConfigError> {
    cfg.validate_full()?;
    let grid = cfg.grid()?;
    let mut q0 = rde_initial_condition::<T>(&grid);
    if cfg.perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for j in 0..grid.num_points() {
            q0[j] += T::lit(rng.gen_range(-cfg.perturbation..=cfg.perturbation));
        }
    }
    Ok((RdeModel::new(cfg.model.clone(), grid)?, q0))
}

pub fn run_fom<T: Real>(cfg: &RunConfig) -> Result<Trajectory<T>, DriverError> {
    let (model, q0) = build_model::<T>(cfg)?;
    Ok(fom_trajectory(&model, &q0, &cfg.time, &cfg.rom.newton, cfg.record_stride)?)
}

pub fn run_adeim<T: Real>(cfg: &RunConfig) -> Result<Trajectory<T>, ConfigError> {
    let settings = cfg.validate()?;
    let (model, q0) = build_model::<T>(cfg)?;
    run_adeim_with(&model, q0, settings, &cfg.time, cfg.record_stride)
}

/// Probe values of both fields over all time steps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub x: f64,
    pub eta: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl ProbeSeries {
    fn push<T: Real>(&mut self, q: &DVector<T>, eta: usize, lambda: usize) {
        self.eta.push(q[eta].as_f64());
        self.lambda.push(q[lambda].as_f64());
    }
}

/// One adaptive run measured against the shared full-model reference.
#[derive(Debug, Clone)]
pub struct VariantResult<T: Real> {
    pub settings: AdeimSettings,
    /// `‖Q̃ − Q‖_F² / ‖Q‖_F²` over all `K + 1` columns; infinite if the adaptive run failed.
    pub error: f64,
    /// The same ratio over the steps the adaptive run completed.
    pub completed_error: f64,
    /// Squared relative error of every completed column.
    pub step_errors: Vec<f64>,
    pub probe: ProbeSeries,
    pub trajectory: Trajectory<T>,
    /// `None` if the adaptive run did not reach the final time.
    pub final_max_eta: Option<f64>,
}

/// A full-model run and several adaptive runs of the same physical setup.
#[derive(Debug, Clone)]
pub struct MultiComparison<T: Real> {
    pub fom: Trajectory<T>,
    pub fom_probe: ProbeSeries,
    pub fom_final_max_eta: f64,
    pub variants: Vec<VariantResult<T>>,
}

/// Full and adaptive runs of one configuration, stepped side by side.
#[derive(Debug, Clone)]
pub struct Comparison<T: Real> {
    pub error: f64,
    pub completed_error: f64,
    pub step_errors: Vec<f64>,
    pub fom_probe: ProbeSeries,
    pub rom_probe: ProbeSeries,
    pub fom: Trajectory<T>,
    pub rom: Trajectory<T>,
    pub fom_final_max_eta: f64,
    pub rom_final_max_eta: Option<f64>,
}

impl<T: Real> Comparison<T> {
    /// Wall-clock ratio of the full run to the adaptive run.
    pub fn speedup(&self) -> f64 {
        self.fom.timings.total_secs / self.rom.timings.total_secs
    }
}

/// Runs the full and the adaptive model of `cfg` in lockstep.
pub fn compare<T: Real>(cfg: &RunConfig) -> Result<Comparison<T>, DriverError> {
    let mut multi = compare_variants::<T>(cfg, std::slice::from_ref(&cfg.rom))?;
    let v = multi.variants.pop().expect("one variant requested");
    Ok(Comparison {
        error: v.error,
        completed_error: v.completed_error,
        step_errors: v.step_errors,
        fom_probe: multi.fom_probe,
        rom_probe: v.probe,
        fom: multi.fom,
        rom: v.trajectory,
        fom_final_max_eta: multi.fom_final_max_eta,
        rom_final_max_eta: v.final_max_eta,
    })
}

struct Tracked<'a, T: Real> {
    solver: AdeimSolver<'a, T, RdeModel<T>>,
    recorder: Recorder<T>,
    probe: ProbeSeries,
    acc: ErrorAccumulator,
    step_errors: Vec<f64>,
    failure: Option<RunFailure>,
}

/// Steps one full-model run and one adaptive run per entry of `variants`
/// together, with the physical setup and output settings of `cfg`.
///
/// Errors are accumulated step by step, so no full snapshot matrix is held
/// in memory; stored trajectories use `cfg.record_stride`.
pub fn compare_variants<T: Real>(
    cfg: &RunConfig,
    variants: &[AdeimSettings],
) -> Result<MultiComparison<T>, DriverError> {
    let (model, q0) = build_model::<T>(cfg)?;
    let grid = cfg.grid()?;
    let k_end = cfg.time.num_steps;
    let (pe, pl) = (
        probe_index(&grid, cfg.probe_x, Field::Eta),
        probe_index(&grid, cfg.probe_x, Field::Lambda),
    );
    let mut fom_probe = ProbeSeries {
        x: grid.coordinate(grid.nearest_index(cfg.probe_x)),
        ..Default::default()
    };
    fom_probe.push(&q0, pe, pl);
    let mut tracked = Vec::with_capacity(variants.len());
    for settings in variants {
        let resolved = settings.resolve(model.dim(), k_end)?;
        let mut t = Tracked {
            solver: AdeimSolver::new(&model, q0.clone(), resolved, &cfg.time)?,
            recorder: Recorder::new(cfg.record_stride, k_end),
            probe: fom_probe.clone(),
            acc: ErrorAccumulator::default(),
            step_errors: Vec::with_capacity(k_end + 1),
            failure: None,
        };
        t.recorder.record(0, &q0);
        t.step_errors.push(t.acc.add(&q0, &q0));
        tracked.push(t);
    }
    let mut fom = FomStepper::new(&model, q0.clone(), cfg.time.dt, cfg.rom.newton);
    let mut fom_rec = Recorder::new(cfg.record_stride, k_end);
    fom_rec.record(0, &q0);
    let mut fom_diag = Diagnostics::default();
    let mut fom_secs = 0.0;
    for k in 1..=k_end {
        let start = Instant::now();
        let iterations = fom
            .advance()
            .map_err(|source| FomError { step: k, source })?;
        fom_secs += start.elapsed().as_secs_f64();
        fom_diag.full_newton_iterations.push(iterations);
        fom_rec.record(k, fom.state());
        fom_probe.push(fom.state(), pe, pl);
        for t in tracked.iter_mut().filter(|t| t.failure.is_none()) {
            match t.solver.advance() {
                Ok(()) => {
                    let q = t.solver.state();
                    t.recorder.record(k, q);
                    t.probe.push(q, pe, pl);
                    t.step_errors.push(t.acc.add(q, fom.state()));
                }
                Err(e) => {
                    log::warn!("adaptive run stopped at step {k}: {e}");
                    t.failure = Some(RunFailure {
                        step: k,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    let dim = model.dim();
    let fom_timings = Timings {
        total_secs: fom_secs,
        full_model_secs: fom_secs,
        reduced_model_secs: 0.0,
    };
    let variants = tracked
        .into_iter()
        .zip(variants)
        .map(|(t, settings)| {
            let final_max_eta = t.failure.is_none().then(|| max_eta(t.solver.state(), &grid));
            let completed_error = t.acc.value();
            VariantResult {
                settings: settings.clone(),
                error: if t.failure.is_some() {
                    f64::INFINITY
                } else {
                    completed_error
                },
                completed_error,
                step_errors: t.step_errors,
                probe: t.probe,
                trajectory: t.recorder.finish(
                    dim,
                    cfg.time.dt,
                    t.solver.timings(),
                    t.solver.diagnostics().clone(),
                    t.failure,
                ),
                final_max_eta,
            }
        })
        .collect();
    Ok(MultiComparison {
        fom_final_max_eta: max_eta(fom.state(), &grid),
        fom: fom_rec.finish(dim, cfg.time.dt, fom_timings, fom_diag, None),
        fom_probe,
        variants,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fom,
    Rom,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fom" => Ok(Self::Fom),
            "rom" => Ok(Self::Rom),
            other => Err(format!("unknown model `{other}` (expected fom or rom)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub mu: f64,
    /// `max_x η(x, T)`; `None` when the run failed.
    pub max_eta: Option<f64>,
    pub failure: Option<String>,
    pub wall_secs: f64,
}

/// `max_x η(x, T)` at the final time for each injection parameter.
///
/// Runs are independent and may execute on `jobs` threads; failures are
/// recorded per point and the sweep continues. Output order follows `mus`.
pub fn bifurcation_sweep(
    template: &RunConfig,
    mus: &[f64],
    kind: ModelKind,
    jobs: usize,
) -> Result<Vec<BifurcationPoint>, DriverError> {
    if mus.is_empty() {
        return Err(ConfigError::Invalid {
            field: "mu",
            reason: "empty parameter list".into(),
        }
        .into());
    }
    let configs: Vec<RunConfig> = mus
        .iter()
        .map(|&mu| {
            let mut cfg = template.clone();
            cfg.model.mu = mu;
            cfg.record_stride = cfg.time.num_steps.max(1);
            match kind {
                ModelKind::Fom => cfg.validate_full().map(|_| cfg),
                ModelKind::Rom => cfg.validate().map(|_| cfg),
            }
        })
        .collect::<Result<_, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| DriverError::ThreadPool(e.to_string()))?;
    Ok(pool.install(|| configs.par_iter().map(|cfg| sweep_point(cfg, kind)).collect()))
}

fn sweep_point(cfg: &RunConfig, kind: ModelKind) -> BifurcationPoint {
    let start = Instant::now();
    let outcome: Result<Trajectory<f64>, String> = match kind {
        ModelKind::Fom => run_fom(cfg).map_err(|e| e.to_string()),
        ModelKind::Rom => run_adeim(cfg).map_err(|e| e.to_string()),
    };
    let grid = cfg.grid().expect("grid validated before the sweep");
    let (max_eta, failure) = match outcome {
        Ok(t) => match (&t.failure, t.last_state()) {
            (None, Some(q)) => (Some(max_eta(&q, &grid)), None),
            (Some(f), _) => (None, Some(format!("step {}: {}", f.step, f.message))),
            (None, None) => (None, Some("no states recorded".into())),
        },
        Err(e) => (None, Some(e)),
    };
    log::info!("mu = {}: {:?}", cfg.model.mu, max_eta);
    BifurcationPoint {
        mu: cfg.model.mu,
        max_eta,
        failure,
        wall_secs: start.elapsed().as_secs_f64(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub available_threads: usize,
    pub crate_version: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            available_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            crate_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// Wall-clock comparison of full and adaptive runs; informative only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub grid_points: usize,
    pub full_dim: usize,
    pub fom_secs: Vec<f64>,
    pub rom_secs: Vec<f64>,
    /// FOM/ROM ratio per repetition; values below 1 mean the reduced run was slower.
    pub speedups: Vec<f64>,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Speedup range reported for this benchmark in the literature.
    pub reference_band: (f64, f64),
    pub rom_failures: usize,
    pub environment: Environment,
}

pub fn bench(cfg: &RunConfig, repeats: usize) -> Result<BenchReport, DriverError> {
    let settings = cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.record_stride = cfg.time.num_steps.max(1);
    let repeats = repeats.max(1);
    let (mut fom_secs, mut rom_secs, mut rom_failures) = (Vec::new(), Vec::new(), 0);
    for _ in 0..repeats {
        let start = Instant::now();
        run_fom::<f64>(&cfg)?;
        fom_secs.push(start.elapsed().as_secs_f64());
        let (model, q0) = build_model::<f64>(&cfg)?;
        let start = Instant::now();
        let t = run_adeim_with(&model, q0, settings.clone(), &cfg.time, cfg.record_stride)?;
        rom_secs.push(start.elapsed().as_secs_f64());
        rom_failures += usize::from(t.is_unstable());
    }
    let speedups: Vec<f64> = fom_secs.iter().zip(&rom_secs).map(|(f, r)| f / r).collect();
    let mut sorted = speedups.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Ok(BenchReport {
        grid_points: cfg.grid_points,
        full_dim: cfg.full_dim(),
        min: sorted[0],
        median,
        max: sorted[sorted.len() - 1],
        speedups,
        fom_secs,
        rom_secs,
        reference_band: (2.0, 6.0),
        rom_failures,
        environment: Environment::current(),
    })
}
