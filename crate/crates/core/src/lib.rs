//! Online adaptive model reduction with lookahead data sampling.
//!
//! The crate builds reduced models whose basis is adapted every time step by a
//! rank-1 update fitted to a window of data samples. Samples come either from
//! the current lifted reduced state (lookback) or from a cheap explicit
//! predictor integrated a few substeps into the future (lookahead).
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below are what the driver and CLI use.

pub mod adaptation;
pub mod driver;
pub mod io;
pub mod linalg;
pub mod lookahead;
pub mod models;
pub mod rom;
pub mod scalar;
pub mod trajectory;

pub use scalar::Real;

pub type Basis64 = rom::Basis<f64>;
pub type Trajectory64 = trajectory::Trajectory<f64>;
pub type RdeModel64 = models::RdeModel<f64>;
pub type RdeSolver64<'a> = driver::AdeimSolver<'a, f64, models::RdeModel<f64>>;

pub type Basis32 = rom::Basis<f32>;
pub type Trajectory32 = trajectory::Trajectory<f32>;
