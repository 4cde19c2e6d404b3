//! Time-indexed state sequences and the run metadata recorded alongside them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::Real;

/// Wall-clock split of a run, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_secs: f64,
    /// Time spent stepping the full model (the whole run for full-order solves,
    /// the initialization segment for adaptive runs).
    pub full_model_secs: f64,
    /// Time spent in the reduced loop (solve, sampling, adaptation).
    pub reduced_model_secs: f64,
}

/// Per-step record of the adaptive loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomStepRecord {
    pub k: usize,
    pub newton_iterations: usize,
    pub sampling_update: bool,
    /// Time indices of the oldest and newest window column used for the update.
    pub window_first: usize,
    pub window_last: usize,
    pub window_len: usize,
    pub basis_dim: usize,
    pub objective_before: f64,
    pub objective_after: f64,
    pub degenerate_update: bool,
    pub predictor_fallback: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Newton iterations of every full-model step, in order.
    pub full_newton_iterations: Vec<usize>,
    pub rom_steps: Vec<RomStepRecord>,
}

impl Diagnostics {
    pub fn predictor_fallbacks(&self) -> usize {
        self.rom_steps.iter().filter(|r| r.predictor_fallback).count()
    }

    pub fn sampling_updates(&self) -> usize {
        self.rom_steps.iter().filter(|r| r.sampling_update).count()
    }
}

/// Why a run stopped before reaching the final time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub step: usize,
    pub message: String,
}

/// Stored states of a run, as columns of an `N × stored` matrix.
///
/// With `stride == 1` every time step is kept and `states` is the full
/// snapshot matrix `[q_0, …, q_K]`.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub dt: f64,
    /// Time index of each stored column.
    pub steps: Vec<usize>,
    pub states: DMatrix<T>,
    pub timings: Timings,
    pub diagnostics: Diagnostics,
    pub failure: Option<RunFailure>,
}

impl<T: Real> Trajectory<T> {
    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_unstable(&self) -> bool {
        self.failure.is_some()
    }

    pub fn last_state(&self) -> Option<DVector<T>> {
        (self.states.ncols() > 0).then(|| self.states.column(self.states.ncols() - 1).into_owned())
    }

    /// Stored column holding time index `k`, if any.
    pub fn state_at(&self, k: usize) -> Option<DVector<T>> {
        self.steps
            .binary_search(&k)
            .ok()
            .map(|c| self.states.column(c).into_owned())
    }
}

/// Collects states at a fixed stride; the final step is always kept.
#[derive(Debug, Clone)]
pub struct Recorder<T: Real> {
    stride: usize,
    final_step: usize,
    steps: Vec<usize>,
    columns: Vec<DVector<T>>,
}

impl<T: Real> Recorder<T> {
    pub fn new(stride: usize, final_step: usize) -> Self {
        Self {
            stride: stride.max(1),
            final_step,
            steps: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn wants(&self, k: usize) -> bool {
        k % self.stride == 0 || k == self.final_step
    }

    pub fn record(&mut self, k: usize, state: &DVector<T>) {
        if self.wants(k) {
            self.steps.push(k);
            self.columns.push(state.clone());
        }
    }

    pub fn finish(
        self,
        dim: usize,
        dt: f64,
        timings: Timings,
        diagnostics: Diagnostics,
        failure: Option<RunFailure>,
    ) -> Trajectory<T> {
        let states = if self.columns.is_empty() {
            DMatrix::zeros(dim, 0)
        } else {
            DMatrix::from_columns(&self.columns)
        };
        Trajectory {
            dt,
            steps: self.steps,
            states,
            timings,
            diagnostics,
            failure,
        }
    }
}
