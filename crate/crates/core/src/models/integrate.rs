use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{check_finite, Dynamics, ModelError, TimeGrid};
use crate::trajectory::{Diagnostics, Recorder, RunFailure, Timings, Trajectory};
use crate::Real;

/// Stopping rule for the Newton solves of implicit time steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    /// Absolute tolerance on the Euclidean norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepReport<T: Real> {
    pub state: DVector<T>,
    pub iterations: usize,
    pub residual: T,
}

/// One implicit-Euler step: solves `q − dt·f̄(q) = q_prev` by Newton's method
/// seeded at `q_prev`.
pub fn implicit_euler_step<T: Real, D: Dynamics<T> + ?Sized>(
    model: &D,
    q_prev: &DVector<T>,
    dt: T,
    opts: &NewtonOptions,
) -> Result<StepReport<T>, ModelError> {
    check_finite(q_prev.as_slice())?;
    let n = model.dim();
    if q_prev.len() != n {
        return Err(ModelError::Invalid(format!(
            "state has length {}, model dimension is {n}",
            q_prev.len()
        )));
    }
    let tol = T::lit(opts.tol);
    let mut q = q_prev.clone();
    let mut f = DVector::zeros(n);
    let mut residual = T::zero();
    for it in 0..=opts.max_iter {
        model.rhs(q.as_slice(), f.as_mut_slice());
        let g = &q - &f * dt - q_prev;
        residual = g.norm();
        if residual <= tol {
            return Ok(StepReport {
                state: q,
                iterations: it,
                residual,
            });
        }
        if it == opts.max_iter || !residual.is_finite() {
            break;
        }
        let neg_g: Vec<T> = g.iter().map(|v| -*v).collect();
        let delta = model.solve_shifted(q.as_slice(), dt, &neg_g)?;
        for (qi, di) in q.iter_mut().zip(delta) {
            *qi += di;
        }
    }
    Err(ModelError::NewtonDiverged {
        iterations: opts.max_iter,
        residual: residual.as_f64(),
    })
}

/// Incremental full-order solver, one implicit-Euler step per call.
pub struct FomStepper<'a, T: Real, D: ?Sized> {
    model: &'a D,
    state: DVector<T>,
    step: usize,
    dt: T,
    opts: NewtonOptions,
}

impl<'a, T: Real, D: Dynamics<T> + ?Sized> FomStepper<'a, T, D> {
    pub fn new(model: &'a D, q0: DVector<T>, dt: f64, opts: NewtonOptions) -> Self {
        Self {
            model,
            state: q0,
            step: 0,
            dt: T::lit(dt),
            opts,
        }
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> &DVector<T> {
        &self.state
    }

    /// Advances to the next time step and returns the Newton iteration count.
    pub fn advance(&mut self) -> Result<usize, ModelError> {
        let report = implicit_euler_step(self.model, &self.state, self.dt, &self.opts)?;
        self.state = report.state;
        self.step += 1;
        Ok(report.iterations)
    }
}

/// Error of a full-order run, tagged with the step that failed.
#[derive(Debug, Clone, thiserror::Error)]
#[error("full-model step {step} failed: {source}")]
pub struct FomError {
    pub step: usize,
    #[source]
    pub source: ModelError,
}

/// Time-steps the full model from `q0`, keeping every `stride`-th state.
pub fn fom_trajectory<T: Real, D: Dynamics<T> + ?Sized>(
    model: &D,
    q0: &DVector<T>,
    time: &TimeGrid,
    opts: &NewtonOptions,
    stride: usize,
) -> Result<Trajectory<T>, FomError> {
    time.validate().map_err(|source| FomError { step: 0, source })?;
    let start = Instant::now();
    let mut recorder = Recorder::new(stride, time.num_steps);
    let mut stepper = FomStepper::new(model, q0.clone(), time.dt, *opts);
    let mut diagnostics = Diagnostics::default();
    recorder.record(0, stepper.state());
    for k in 1..=time.num_steps {
        let iterations = stepper
            .advance()
            .map_err(|source| FomError { step: k, source })?;
        diagnostics.full_newton_iterations.push(iterations);
        recorder.record(k, stepper.state());
    }
    let secs = start.elapsed().as_secs_f64();
    let timings = Timings {
        total_secs: secs,
        full_model_secs: secs,
        reduced_model_secs: 0.0,
    };
    Ok(recorder.finish(model.dim(), time.dt, timings, diagnostics, None::<RunFailure>))
}
