use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::config::{ConfigError, ResolvedSettings, Strategy};
use crate::adaptation::{
    adapt_basis, lookback_sample, rank1_update, update_sampling_points, AdaptError, DataWindow,
};
use crate::lookahead::{
    lookahead_sample, lookahead_sample_projected, PredictorError, PredictorMode,
};
use crate::models::{check_finite, Dynamics, FomStepper, ModelError, TimeGrid};
use crate::rom::{pod_completed, qdeim_points_oversampled, Basis, IndexSelection, ReducedStepper, RomError};
use crate::trajectory::{Diagnostics, Recorder, RomStepRecord, RunFailure, Timings, Trajectory};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("full-model step failed: {0}")]
    Fom(ModelError),
    #[error("reduced step failed: {0}")]
    Rom(#[from] RomError),
    #[error("basis adaptation failed: {0}")]
    Adapt(#[from] AdaptError),
    #[error("data sample failed: {0}")]
    Predictor(#[from] PredictorError),
    #[error("reduced solution is not finite: {0}")]
    NonFinite(ModelError),
    #[error("run already reached its final step")]
    Finished,
}

struct RomState<T: Real> {
    basis: Basis<T>,
    points: IndexSelection,
    sampling: Option<IndexSelection>,
    reduced: DVector<T>,
    window: DataWindow<T>,
}

/// Adaptive reduced model advanced one time step per call.
///
/// The first `w_init` steps use the full model. The reduced model then starts
/// from a POD basis of those snapshots and adapts its basis every step from a
/// window of data samples.
pub struct AdeimSolver<'a, T: Real, D: Dynamics<T> + ?Sized> {
    model: &'a D,
    settings: ResolvedSettings,
    dt: T,
    num_steps: usize,
    k: usize,
    state: DVector<T>,
    fom: Option<FomStepper<'a, T, D>>,
    snapshots: Vec<DVector<T>>,
    rom: Option<RomState<T>>,
    diagnostics: Diagnostics,
    timings: Timings,
}

impl<'a, T: Real, D: Dynamics<T> + ?Sized> AdeimSolver<'a, T, D> {
    pub fn new(
        model: &'a D,
        q0: DVector<T>,
        settings: ResolvedSettings,
        time: &TimeGrid,
    ) -> Result<Self, ConfigError> {
        time.validate()?;
        if q0.len() != model.dim() {
            return Err(ConfigError::Invalid {
                field: "initial condition",
                reason: format!("length {} for model dimension {}", q0.len(), model.dim()),
            });
        }
        if settings.w_init >= time.num_steps {
            return Err(ConfigError::Invalid {
                field: "w_init",
                reason: format!(
                    "{} leaves no reduced steps with num_steps = {}",
                    settings.w_init, time.num_steps
                ),
            });
        }
        let mut snapshots = Vec::with_capacity(settings.w_init + 1);
        snapshots.push(q0.clone());
        Ok(Self {
            model,
            dt: T::lit(time.dt),
            num_steps: time.num_steps,
            k: 0,
            fom: Some(FomStepper::new(model, q0.clone(), time.dt, settings.newton)),
            state: q0,
            snapshots,
            rom: None,
            settings,
            diagnostics: Diagnostics::default(),
            timings: Timings::default(),
        })
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn is_finished(&self) -> bool {
        self.k >= self.num_steps
    }

    /// Current full state: a full-model state during initialization and the
    /// lifted reduced state afterwards.
    pub fn state(&self) -> &DVector<T> {
        &self.state
    }

    pub fn settings(&self) -> &ResolvedSettings {
        &self.settings
    }

    pub fn basis(&self) -> Option<&Basis<T>> {
        self.rom.as_ref().map(|r| &r.basis)
    }

    pub fn interpolation_points(&self) -> Option<&IndexSelection> {
        self.rom.as_ref().map(|r| &r.points)
    }

    pub fn sampling_points(&self) -> Option<&IndexSelection> {
        self.rom.as_ref().and_then(|r| r.sampling.as_ref())
    }

    pub fn reduced_state(&self) -> Option<&DVector<T>> {
        self.rom.as_ref().map(|r| &r.reduced)
    }

    pub fn window_indices(&self) -> Vec<usize> {
        self.rom
            .as_ref()
            .map(|r| r.window.time_indices())
            .unwrap_or_default()
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn timings(&self) -> Timings {
        self.timings
    }

    /// Advances to the next time step.
    pub fn advance(&mut self) -> Result<(), StepError> {
        if self.is_finished() {
            return Err(StepError::Finished);
        }
        let start = Instant::now();
        let result = if self.k < self.settings.w_init {
            self.full_step()
        } else {
            self.reduced_step()
        };
        let secs = start.elapsed().as_secs_f64();
        if self.k <= self.settings.w_init {
            self.timings.full_model_secs += secs;
        } else {
            self.timings.reduced_model_secs += secs;
        }
        self.timings.total_secs += secs;
        result
    }

    fn full_step(&mut self) -> Result<(), StepError> {
        let fom = self.fom.as_mut().expect("full-model stepper present during initialization");
        let iterations = fom.advance().map_err(StepError::Fom)?;
        self.diagnostics.full_newton_iterations.push(iterations);
        self.state = fom.state().clone();
        self.snapshots.push(self.state.clone());
        self.k += 1;
        if self.k == self.settings.w_init {
            self.initialize_reduced()?;
        }
        Ok(())
    }

    fn initialize_reduced(&mut self) -> Result<(), StepError> {
        let snapshots = DMatrix::from_columns(&self.snapshots);
        let basis = pod_completed(&snapshots, self.settings.n)?;
        let points = qdeim_points_oversampled(&basis, self.settings.m)?;
        let mut window = DataWindow::new(self.settings.w)?;
        // Pre-fill with Q[:, k−w+1 .. k−1] for the first reduced step k = w_init + 1.
        let first = (self.k + 2).saturating_sub(self.settings.w);
        for j in first..=self.k {
            window.push(j, self.snapshots[j].clone())?;
        }
        let reduced = basis.project(&self.state);
        self.rom = Some(RomState {
            basis,
            points,
            sampling: None,
            reduced,
            window,
        });
        self.fom = None;
        self.snapshots = Vec::new();
        Ok(())
    }

    fn reduced_step(&mut self) -> Result<(), StepError> {
        let k = self.k + 1;
        let settings = &self.settings;
        let model = self.model;
        let rom = self.rom.as_mut().expect("reduced state present after initialization");

        let mut stepper = ReducedStepper::new(model, &rom.basis, &rom.points)?;
        let report = stepper.step(model, &rom.reduced, self.dt, &settings.newton)?;
        rom.reduced = report.state;
        let lifted = rom.basis.lift(&rom.reduced);
        check_finite(lifted.as_slice()).map_err(StepError::NonFinite)?;

        let update_points = k % settings.z == 0 || k == settings.w_init + 1;
        let all = IndexSelection::all(rom.basis.dim());
        let lookback = |sampling: &IndexSelection| {
            lookback_sample(model, &rom.basis, sampling, &rom.reduced, self.dt)
        };
        let mut fallback = false;
        let sample = match settings.strategy {
            Strategy::Lookback if update_points => lookback(&all)?,
            Strategy::Lookback => lookback(current_sampling(&rom.sampling)?)?,
            Strategy::Lookahead => {
                let attempt = if update_points {
                    lookahead_sample(
                        model,
                        &rom.basis,
                        &all,
                        &rom.reduced,
                        self.dt,
                        &settings.predictor,
                        PredictorMode::Full,
                    )
                } else if settings.projected_lookahead {
                    lookahead_sample_projected(
                        model,
                        &rom.basis,
                        current_sampling(&rom.sampling)?,
                        &rom.reduced,
                        self.dt,
                        &settings.predictor,
                    )
                } else {
                    lookahead_sample(
                        model,
                        &rom.basis,
                        current_sampling(&rom.sampling)?,
                        &rom.reduced,
                        self.dt,
                        &settings.predictor,
                        PredictorMode::Reduced,
                    )
                };
                match attempt {
                    Ok(sample) => sample,
                    Err(PredictorError::BlowUp { substep, magnitude }) => {
                        log::warn!(
                            "step {k}: predictor blew up at substep {substep} (|q| = {magnitude:e}); using lookback sample"
                        );
                        fallback = true;
                        if update_points {
                            lookback(&all)?
                        } else {
                            lookback(current_sampling(&rom.sampling)?)?
                        }
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };

        rom.window.push(k, sample)?;
        let (window, indices) = rom.window.matrix_ending_at(k)?;
        if update_points {
            rom.sampling = Some(update_sampling_points(
                &window,
                &rom.basis,
                &rom.points,
                settings.m_s,
            )?);
        }
        let update = rank1_update(&rom.basis, &window)?;
        let basis = adapt_basis(&rom.basis, &update)?;
        rom.reduced = basis.project(&lifted);
        rom.points = qdeim_points_oversampled(&basis, settings.m)?;
        rom.basis = basis;

        self.diagnostics.rom_steps.push(RomStepRecord {
            k,
            newton_iterations: report.iterations,
            sampling_update: update_points,
            window_first: indices[0],
            window_last: *indices.last().expect("window is nonempty"),
            window_len: indices.len(),
            basis_dim: rom.basis.rank(),
            objective_before: update.objective_before.as_f64(),
            objective_after: update.objective_after.as_f64(),
            degenerate_update: update.degenerate,
            predictor_fallback: fallback,
        });
        self.state = lifted;
        self.k = k;
        Ok(())
    }
}

fn current_sampling(s: &Option<IndexSelection>) -> Result<&IndexSelection, StepError> {
    s.as_ref().ok_or_else(|| {
        StepError::Rom(RomError::Selection(
            "sampling points requested before the first update".into(),
        ))
    })
}

/// Runs the adaptive model to the final time, keeping every `stride`-th state.
///
/// A failing step ends the run early; the states computed so far are returned
/// with [`Trajectory::failure`] set.
pub fn run_adeim_with<T: Real, D: Dynamics<T> + ?Sized>(
    model: &D,
    q0: DVector<T>,
    settings: ResolvedSettings,
    time: &TimeGrid,
    stride: usize,
) -> Result<Trajectory<T>, ConfigError> {
    let dim = model.dim();
    let mut solver = AdeimSolver::new(model, q0, settings, time)?;
    let mut recorder = Recorder::new(stride, time.num_steps);
    recorder.record(0, solver.state());
    let mut failure = None;
    while !solver.is_finished() {
        let k = solver.step_index() + 1;
        if let Err(e) = solver.advance() {
            failure = Some(RunFailure {
                step: k,
                message: e.to_string(),
            });
            break;
        }
        recorder.record(k, solver.state());
    }
    let timings = solver.timings();
    let diagnostics = std::mem::take(&mut solver.diagnostics);
    Ok(recorder.finish(dim, time.dt, timings, diagnostics, failure))
}
