use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::Grid1D;
use crate::trajectory::Trajectory;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Running sums for `‖Q̃ − Q‖_F² / ‖Q‖_F²`, fed one column pair at a time.
///
/// The ratio is of squared norms, so a 10% deviation in every column reads as 0.01.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorAccumulator {
    numerator: f64,
    denominator: f64,
    columns: usize,
}

impl ErrorAccumulator {
    /// Adds one column pair and returns its own squared relative error.
    pub fn add<T: Real>(&mut self, approx: &DVector<T>, reference: &DVector<T>) -> f64 {
        let diff: f64 = approx
            .iter()
            .zip(reference.iter())
            .map(|(a, r)| {
                let d = (*a - *r).as_f64();
                d * d
            })
            .sum();
        let norm: f64 = reference.iter().map(|r| r.as_f64() * r.as_f64()).sum();
        self.numerator += diff;
        self.denominator += norm;
        self.columns += 1;
        ratio(diff, norm)
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn value(&self) -> f64 {
        ratio(self.numerator, self.denominator)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Squared relative Frobenius error `‖Q̃ − Q‖_F² / ‖Q‖_F²` between stored trajectories.
pub fn avg_rel_error<T: Real>(rom: &Trajectory<T>, fom: &Trajectory<T>) -> Result<f64, MetricError> {
    if rom.states.shape() != fom.states.shape() {
        return Err(MetricError::Shape(format!(
            "{:?} vs {:?}",
            rom.states.shape(),
            fom.states.shape()
        )));
    }
    if rom.steps != fom.steps {
        return Err(MetricError::Shape("trajectories store different time steps".into()));
    }
    let mut acc = ErrorAccumulator::default();
    for (a, r) in rom.states.column_iter().zip(fom.states.column_iter()) {
        acc.add(&a.into_owned(), &r.into_owned());
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Eta,
    Lambda,
}

impl FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eta" => Ok(Self::Eta),
            "lambda" => Ok(Self::Lambda),
            other => Err(format!("unknown field `{other}` (expected eta or lambda)")),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Eta => "eta",
            Self::Lambda => "lambda",
        })
    }
}

/// State index of `field` at the grid node nearest to `x`.
pub fn probe_index(grid: &Grid1D, x: f64, field: Field) -> usize {
    let j = grid.nearest_index(x);
    match field {
        Field::Eta => j,
        Field::Lambda => grid.num_points() + j,
    }
}

/// Values of `field` at the node nearest to `x`, one per stored column.
pub fn probe<T: Real>(traj: &Trajectory<T>, grid: &Grid1D, x: f64, field: Field) -> Vec<T> {
    let i = probe_index(grid, x, field);
    traj.states.row(i).iter().copied().collect()
}

/// `max_x η(x)` of a stacked `[η; λ]` state.
pub fn max_eta<T: Real>(state: &DVector<T>, grid: &Grid1D) -> f64 {
    state
        .rows(0, grid.num_points())
        .iter()
        .map(|v| v.as_f64())
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Recorder;

    fn traj(columns: &[Vec<f64>]) -> Trajectory<f64> {
        let mut r = Recorder::new(1, columns.len() - 1);
        for (k, c) in columns.iter().enumerate() {
            r.record(k, &DVector::from_vec(c.clone()));
        }
        r.finish(columns[0].len(), 0.1, Default::default(), Default::default(), None)
    }

    #[test]
    fn identical_and_zero_trajectories() {
        let q = traj(&[vec![1.0, 2.0], vec![3.0, -1.0]]);
        let z = traj(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(avg_rel_error(&q, &q).unwrap(), 0.0);
        assert!((avg_rel_error(&z, &q).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = traj(&[vec![1.0, 2.0], vec![3.0, -1.0]]);
        let b = traj(&[vec![1.0, 2.0]]);
        assert!(avg_rel_error(&a, &b).is_err());
    }

    #[test]
    fn probe_picks_nearest_node() {
        let grid = Grid1D::new(8).unwrap();
        let t = traj(&[(0..16).map(|i| i as f64).collect()]);
        let dx = grid.dx();
        assert_eq!(probe(&t, &grid, 3.0 * dx, Field::Eta), vec![3.0]);
        assert_eq!(probe(&t, &grid, 3.4 * dx, Field::Lambda), vec![11.0]);
        assert_eq!(probe(&t, &grid, 3.5 * dx, Field::Eta), vec![3.0]);
    }
}
