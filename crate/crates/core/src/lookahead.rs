//! Explicit predictor models that look ahead in time, and the lookahead data
//! samples built from them.
//!
//! A predictor advances `q ↦ q + δτ·f̄(q)` (forward Euler) with `δτ = δt / C_τ`,
//! so that `C_τ` predictor steps cover exactly one step of the full model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{check_finite, Dynamics, ModelError};
use crate::rom::{Basis, IndexSelection, Interpolator, RomError};
use crate::Real;

/// Magnitude above which a predictor state is treated as blown up.
pub const DEFAULT_GUARD: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("predictor needs at least one substep")]
    NoSubsteps,
    #[error("predictor blew up at substep {substep} (max |q| = {magnitude:e})")]
    BlowUp { substep: usize, magnitude: f64 },
    #[error(transparent)]
    Rom(#[from] RomError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    /// Number of predictor substeps per full-model step.
    pub c_tau: usize,
    /// States with an entry above this magnitude abort the sample.
    pub guard: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            c_tau: 5,
            guard: DEFAULT_GUARD,
        }
    }
}

impl PredictorConfig {
    pub fn new(c_tau: usize) -> Result<Self, PredictorError> {
        let cfg = Self {
            c_tau,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.c_tau == 0 {
            return Err(PredictorError::NoSubsteps);
        }
        Ok(())
    }

    pub fn dtau<T: Real>(&self, dt: T) -> T {
        dt / T::from_count(self.c_tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorMode {
    Full,
    Reduced,
}

/// One forward Euler step `q + δτ·f̄(q)` of the full predictor.
pub fn predictor_step_full<T: Real, D: Dynamics<T> + ?Sized>(
    model: &D,
    q: &DVector<T>,
    dtau: T,
) -> Result<DVector<T>, ModelError> {
    check_finite(q.as_slice())?;
    let mut f = vec![T::zero(); q.len()];
    model.rhs(q.as_slice(), &mut f);
    let next = DVector::from_iterator(q.len(), q.iter().zip(&f).map(|(&qi, &fi)| qi + dtau * fi));
    check_finite(next.as_slice())?;
    Ok(next)
}

/// Reduced predictor for a frozen `(V, s)` pair.
///
/// The next state takes the exact predictor values at the sampling points and
/// fills every other entry by empirical interpolation of those values.
pub struct ReducedPredictor<T: Real> {
    sampling: Vec<usize>,
    complement: Vec<usize>,
    interp: Interpolator<T>,
    v_complement: DMatrix<T>,
}

impl<T: Real> ReducedPredictor<T> {
    pub fn new(basis: &Basis<T>, sampling: &IndexSelection) -> Result<Self, RomError> {
        let interp = Interpolator::new(basis, sampling)?;
        let complement = sampling.complement();
        Ok(Self {
            sampling: sampling.as_slice().to_vec(),
            v_complement: basis.rows(&complement),
            complement,
            interp,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.sampling.len()
    }

    pub fn step<D: Dynamics<T> + ?Sized>(
        &self,
        model: &D,
        q: &DVector<T>,
        dtau: T,
    ) -> Result<DVector<T>, ModelError> {
        check_finite(q.as_slice())?;
        let sampled = DVector::from_iterator(
            self.sampling.len(),
            self.sampling
                .iter()
                .map(|&i| q[i] + dtau * model.rhs_component(q.as_slice(), i)),
        );
        Ok(self.assemble(&sampled, q.len()))
    }

    /// Full-length vector with `sampled` at the sampling points and its
    /// interpolation elsewhere.
    fn assemble(&self, sampled: &DVector<T>, dim: usize) -> DVector<T> {
        let mut out = DVector::zeros(dim);
        if !self.complement.is_empty() {
            let filled = &self.v_complement * self.interp.coefficients(sampled);
            for (&i, v) in self.complement.iter().zip(filled.iter()) {
                out[i] = *v;
            }
        }
        for (&i, v) in self.sampling.iter().zip(sampled.iter()) {
            out[i] = *v;
        }
        out
    }
}

fn guard<T: Real>(q: &DVector<T>, limit: f64, substep: usize) -> Result<(), PredictorError> {
    let magnitude = q.iter().fold(0.0f64, |acc, v| {
        let a = v.as_f64().abs();
        if a.is_nan() { f64::INFINITY } else { acc.max(a) }
    });
    if magnitude > limit {
        return Err(PredictorError::BlowUp { substep, magnitude });
    }
    Ok(())
}

fn blow_up(substep: usize) -> impl Fn(ModelError) -> PredictorError {
    move |e| match e {
        ModelError::NonFinite { .. } => PredictorError::BlowUp {
            substep,
            magnitude: f64::INFINITY,
        },
        other => PredictorError::Model(other),
    }
}

/// Integrates the chosen predictor `C_τ` substeps from `V q̃`, approximating
/// the full-model state one step ahead.
pub fn lookahead_sample<T: Real, D: Dynamics<T> + ?Sized>(
    model: &D,
    basis: &Basis<T>,
    sampling: &IndexSelection,
    reduced: &DVector<T>,
    dt: T,
    cfg: &PredictorConfig,
    mode: PredictorMode,
) -> Result<DVector<T>, PredictorError> {
    cfg.validate()?;
    let dtau = cfg.dtau(dt);
    let mut q = basis.lift(reduced);
    guard(&q, cfg.guard, 0)?;
    match mode {
        PredictorMode::Full => {
            for l in 1..=cfg.c_tau {
                q = predictor_step_full(model, &q, dtau).map_err(blow_up(l))?;
                guard(&q, cfg.guard, l)?;
            }
        }
        PredictorMode::Reduced => {
            let predictor = ReducedPredictor::new(basis, sampling)?;
            for l in 1..=cfg.c_tau {
                q = predictor.step(model, &q, dtau).map_err(blow_up(l))?;
                guard(&q, cfg.guard, l)?;
            }
        }
    }
    Ok(q)
}

/// Variant that also keeps the predictor state in the reduced space.
///
/// The coefficients follow `q̃ ← (V[s,:])† (V q̃ + δτ f̄(V q̃))[s]` for `C_τ`
/// substeps; the sample is one further predictor evaluation at the lifted
/// coefficients, exact at `s` and interpolated elsewhere.
pub fn lookahead_sample_projected<T: Real, D: Dynamics<T> + ?Sized>(
    model: &D,
    basis: &Basis<T>,
    sampling: &IndexSelection,
    reduced: &DVector<T>,
    dt: T,
    cfg: &PredictorConfig,
) -> Result<DVector<T>, PredictorError> {
    cfg.validate()?;
    let dtau = cfg.dtau(dt);
    let predictor = ReducedPredictor::new(basis, sampling)?;
    let sample_at = |coeffs: &DVector<T>, substep: usize| -> Result<DVector<T>, PredictorError> {
        let q = basis.lift(coeffs);
        guard(&q, cfg.guard, substep)?;
        Ok(DVector::from_iterator(
            predictor.sampling.len(),
            predictor
                .sampling
                .iter()
                .map(|&i| q[i] + dtau * model.rhs_component(q.as_slice(), i)),
        ))
    };
    let mut coeffs = reduced.clone();
    for l in 0..cfg.c_tau {
        let sampled = sample_at(&coeffs, l)?;
        coeffs = predictor.interp.coefficients(&sampled);
    }
    let sampled = sample_at(&coeffs, cfg.c_tau)?;
    let out = predictor.assemble(&sampled, basis.dim());
    guard(&out, cfg.guard, cfg.c_tau + 1)?;
    Ok(out)
}
