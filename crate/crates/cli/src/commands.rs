use std::fs;
use std::path::{Path, PathBuf};

use adeim_core::driver::{
    avg_rel_error, bench, bifurcation_sweep, compare, compare_variants, BifurcationPoint,
    Environment, ModelKind, ProbeSeries, Strategy,
};
use adeim_core::io::{read_matrix, write_csv, write_json, write_matrix};
use adeim_core::trajectory::{Diagnostics, RunFailure, Timings};
use adeim_core::Trajectory64;
use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const STATES: &str = "states.bin";
pub const PROBE: &str = "probe.csv";
pub const ERROR: &str = "error.csv";
pub const BIFURCATION: &str = "bifurcation.csv";
pub const BENCH: &str = "bench.json";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub full_steps: usize,
    pub full_newton_iterations: usize,
    pub reduced_steps: usize,
    pub reduced_newton_iterations: usize,
    pub sampling_updates: usize,
    pub predictor_fallbacks: usize,
    pub degenerate_updates: usize,
}

impl From<&Diagnostics> for DiagnosticsSummary {
    fn from(d: &Diagnostics) -> Self {
        Self {
            full_steps: d.full_newton_iterations.len(),
            full_newton_iterations: d.full_newton_iterations.iter().sum(),
            reduced_steps: d.rom_steps.len(),
            reduced_newton_iterations: d.rom_steps.iter().map(|r| r.newton_iterations).sum(),
            sampling_updates: d.sampling_updates(),
            predictor_fallbacks: d.predictor_fallbacks(),
            degenerate_updates: d.rom_steps.iter().filter(|r| r.degenerate_update).count(),
        }
    }
}

/// Everything needed to rerun a command; `adeim --config manifest.json`
/// reproduces the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: ConfigFile,
    pub full_dim: usize,
    pub dt: f64,
    pub num_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    /// Time steps of the stored state columns.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub recorded_steps: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_timings: Option<Timings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsSummary>,
    /// Squared relative error over all time steps; `inf` for unstable runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<RunFailure>,
    pub artifacts: Vec<String>,
    pub environment: Environment,
}

impl Manifest {
    fn new(command: &str, cfg: &ConfigFile) -> Self {
        Self {
            command: command.into(),
            config: cfg.clone(),
            full_dim: cfg.run.full_dim(),
            dt: cfg.run.time.dt,
            num_steps: cfg.run.time.num_steps,
            strategy: None,
            recorded_steps: Vec::new(),
            timings: None,
            reference_timings: None,
            diagnostics: None,
            error: None,
            failure: None,
            artifacts: Vec::new(),
            environment: Environment::current(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|source| CliError::ReadConfig {
            path: path.clone(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::InvalidConfig {
            path,
            message: e.to_string(),
        })
    }
}

struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::CreateDir {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.into());
        self.dir.join(name)
    }

    fn states(&mut self, t: &Trajectory64) -> Result<(), CliError> {
        let path = self.path(STATES);
        Ok(write_matrix(&path, &t.states)?)
    }

    fn probe(&mut self, p: &ProbeSeries, dt: f64) -> Result<(), CliError> {
        let t: Vec<f64> = (0..p.eta.len()).map(|k| k as f64 * dt).collect();
        let path = self.path(PROBE);
        Ok(write_csv(&path, &["t", "eta", "lambda"], &[&t, &p.eta, &p.lambda])?)
    }

    fn finish(mut self, mut manifest: Manifest) -> Result<(), CliError> {
        self.written.push(MANIFEST.into());
        manifest.artifacts = self.written;
        Ok(write_json(&self.dir.join(MANIFEST), &manifest)?)
    }
}

pub fn fom(cfg: &ConfigFile) -> Result<(), CliError> {
    cfg.run.validate_full()?;
    let out = &cfg.output;
    let mut files = Output::create(&out.dir)?;
    let run = compare_variants::<f64>(&cfg.run, &[])?;
    if out.states {
        files.states(&run.fom)?;
    }
    if out.probe {
        files.probe(&run.fom_probe, cfg.run.time.dt)?;
    }
    let mut manifest = Manifest::new("fom", cfg);
    manifest.recorded_steps = run.fom.steps.clone();
    manifest.timings = Some(run.fom.timings);
    manifest.diagnostics = Some((&run.fom.diagnostics).into());
    files.finish(manifest)?;
    println!(
        "full model: {} steps in {:.2} s, max eta at final time {:.6}",
        cfg.run.time.num_steps, run.fom.timings.total_secs, run.fom_final_max_eta
    );
    Ok(())
}

pub fn rom(cfg: &ConfigFile) -> Result<(), CliError> {
    cfg.run.validate()?;
    let out = &cfg.output;
    let mut files = Output::create(&out.dir)?;
    let run = compare::<f64>(&cfg.run)?;
    let dt = cfg.run.time.dt;
    if out.states {
        files.states(&run.rom)?;
    }
    if out.probe {
        files.probe(&run.rom_probe, dt)?;
    }
    if out.error {
        let t: Vec<f64> = (0..run.step_errors.len()).map(|k| k as f64 * dt).collect();
        let path = files.path(ERROR);
        write_csv(&path, &["t", "relative_error"], &[&t, &run.step_errors])?;
    }
    let mut manifest = Manifest::new("rom", cfg);
    manifest.strategy = Some(cfg.run.rom.strategy);
    manifest.recorded_steps = run.rom.steps.clone();
    manifest.timings = Some(run.rom.timings);
    manifest.reference_timings = Some(run.fom.timings);
    manifest.diagnostics = Some((&run.rom.diagnostics).into());
    manifest.error = Some(run.error);
    manifest.failure = run.rom.failure.clone();
    files.finish(manifest)?;
    println!("avg_rel_error = {:e}", run.error);
    match &run.rom.failure {
        Some(f) => Err(CliError::Numerical(format!(
            "reduced model unstable at step {}: {} (squared relative error up to then {:.6e})",
            f.step, f.message, run.completed_error
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    /// Squared relative error over the stored columns.
    pub error: f64,
    pub columns: usize,
    /// Error over every time step as reported by the reduced run, if any.
    pub reported_error: Option<f64>,
    pub reference_secs: f64,
    pub candidate_secs: f64,
    pub speedup: f64,
}

fn load_artifacts(dir: &Path) -> Result<(Manifest, Trajectory64), CliError> {
    let manifest = Manifest::load(dir)?;
    let states = read_matrix(&dir.join(STATES))?;
    let traj = Trajectory64 {
        dt: manifest.dt,
        steps: manifest.recorded_steps.clone(),
        states,
        timings: manifest.timings.unwrap_or_default(),
        diagnostics: Diagnostics::default(),
        failure: manifest.failure.clone(),
    };
    Ok((manifest, traj))
}

pub fn compare_dirs(reference: &Path, candidate: &Path) -> Result<CompareSummary, CliError> {
    let (_, ref_traj) = load_artifacts(reference)?;
    let (cand_manifest, cand_traj) = load_artifacts(candidate)?;
    if ref_traj.steps != cand_traj.steps {
        return Err(CliError::Usage(
            "artifacts were recorded at different time steps".into(),
        ));
    }
    let error = avg_rel_error(&cand_traj, &ref_traj)?;
    let (r, c) = (ref_traj.timings.total_secs, cand_traj.timings.total_secs);
    Ok(CompareSummary {
        error,
        columns: ref_traj.len(),
        reported_error: cand_manifest.error,
        reference_secs: r,
        candidate_secs: c,
        speedup: if c > 0.0 { r / c } else { f64::NAN },
    })
}

pub fn compare_cmd(reference: &Path, candidate: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let summary = compare_dirs(reference, candidate)?;
    if let Some(dir) = out {
        let files = Output::create(dir)?;
        write_json(&files.dir.join(SUMMARY), &summary)?;
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    println!("{text}");
    Ok(())
}

/// `steps` evenly spaced values from `min` to `max` inclusive.
pub fn mu_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if !(min.is_finite() && max.is_finite()) || min > max {
        return Err(CliError::Usage(format!(
            "--mu-min ({min}) must not exceed --mu-max ({max})"
        )));
    }
    match steps {
        0 => Err(CliError::Usage("--mu-steps must be at least 1".into())),
        1 => Ok(vec![min]),
        _ => Ok((0..steps)
            .map(|i| min + (max - min) * i as f64 / (steps - 1) as f64)
            .collect()),
    }
}

pub fn bifurcation(
    cfg: &ConfigFile,
    mus: &[f64],
    kind: ModelKind,
    jobs: usize,
) -> Result<Vec<BifurcationPoint>, CliError> {
    let mut files = Output::create(&cfg.output.dir)?;
    let points = bifurcation_sweep(&cfg.run, mus, kind, jobs.max(1))?;
    let mu: Vec<f64> = points.iter().map(|p| p.mu).collect();
    let max_eta: Vec<f64> = points.iter().map(|p| p.max_eta.unwrap_or(f64::NAN)).collect();
    let path = files.path(BIFURCATION);
    write_csv(&path, &["mu", "max_eta"], &[&mu, &max_eta])?;
    files.finish(Manifest::new(&format!("bifurcation-{kind:?}").to_lowercase(), cfg))?;
    let failed: Vec<&BifurcationPoint> = points.iter().filter(|p| p.failure.is_some()).collect();
    for p in &failed {
        log::warn!("mu = {}: {}", p.mu, p.failure.as_deref().unwrap_or_default());
    }
    if failed.is_empty() {
        Ok(points)
    } else {
        Err(CliError::Numerical(format!(
            "{} of {} sweep points failed",
            failed.len(),
            points.len()
        )))
    }
}

pub fn bench_cmd(cfg: &ConfigFile, repeats: usize) -> Result<(), CliError> {
    let mut files = Output::create(&cfg.output.dir)?;
    let report = bench(&cfg.run, repeats)?;
    let path = files.path(BENCH);
    write_json(&path, &report)?;
    files.finish(Manifest::new("bench", cfg))?;
    println!(
        "speedup over {} repeats: min {:.2}, median {:.2}, max {:.2} (N = {})",
        report.speedups.len(),
        report.min,
        report.median,
        report.max,
        report.full_dim
    );
    Ok(())
}
