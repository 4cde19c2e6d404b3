mod common;

use adeim_core::lookahead::{
    lookahead_sample, lookahead_sample_projected, predictor_step_full, PredictorConfig,
    PredictorMode, ReducedPredictor,
};
use adeim_core::models::{
    rde_initial_condition, FomStepper, Grid1D, LinearModel, NewtonOptions,
};
use adeim_core::rom::{pod_completed, Basis, IndexSelection};
use nalgebra::{DMatrix, DVector};

use common::{rde, Counting};

#[test]
fn reduced_predictor_on_all_points_is_the_full_predictor() {
    let model = rde(32);
    let q = rde_initial_condition::<f64>(&Grid1D::new(32).unwrap());
    let basis = Basis::<f64>::canonical(64, 5);
    let reduced = ReducedPredictor::new(&basis, &IndexSelection::all(64)).unwrap();
    let mut a = q.clone();
    let mut b = q.clone();
    for _ in 0..5 {
        a = reduced.step(&model, &a, 2e-4).unwrap();
        b = predictor_step_full(&model, &b, 2e-4).unwrap();
    }
    assert_eq!(a, b);
}

#[test]
fn reduced_predictor_evaluates_only_sampled_components() {
    let model = Counting::new(rde(32));
    let q = rde_initial_condition::<f64>(&Grid1D::new(32).unwrap());
    let snapshots = DMatrix::from_columns(&[q.clone(), q.map(|v| v * v)]);
    let basis = pod_completed(&snapshots, 4).unwrap();
    let sampling = IndexSelection::new(vec![0, 9, 17, 31, 40, 63], 64).unwrap();
    let cfg = PredictorConfig::new(5).unwrap();
    let reduced = basis.project(&q);
    lookahead_sample(&model, &basis, &sampling, &reduced, 1e-3, &cfg, PredictorMode::Reduced)
        .unwrap();
    assert_eq!(model.calls(), 5 * sampling.len());
    model.reset();
    lookahead_sample(&model, &basis, &sampling, &reduced, 1e-3, &cfg, PredictorMode::Full).unwrap();
    assert_eq!(model.calls(), 5 * 64);
    model.reset();
    lookahead_sample_projected(&model, &basis, &sampling, &reduced, 1e-3, &cfg).unwrap();
    assert_eq!(model.calls(), 6 * sampling.len());
}

#[test]
fn full_predictor_is_forward_euler_with_substeps() {
    // dq/dt = -q from 1 with C_τ = 4 substeps of dt/4: (1 − dt/4)⁴.
    let model = LinearModel::<f64>::scalar_decay(1.0);
    let basis = Basis::<f64>::canonical(1, 1);
    let cfg = PredictorConfig::new(4).unwrap();
    let q = lookahead_sample(
        &model,
        &basis,
        &IndexSelection::all(1),
        &DVector::from_element(1, 1.0),
        0.1,
        &cfg,
        PredictorMode::Full,
    )
    .unwrap();
    assert!((q[0] - 0.975f64.powi(4)).abs() < 1e-15);
}

#[test]
fn lookahead_sample_is_closer_to_the_next_state_than_the_lifted_state() {
    let model = rde(64);
    let grid = Grid1D::new(64).unwrap();
    let mut fom = FomStepper::new(&model, rde_initial_condition(&grid), 1e-3, NewtonOptions::default());
    let mut snapshots = vec![fom.state().clone()];
    for _ in 0..300 {
        fom.advance().unwrap();
        snapshots.push(fom.state().clone());
    }
    let current = snapshots[299].clone();
    let next = snapshots[300].clone();
    let basis = pod_completed(&DMatrix::from_columns(&snapshots), 12).unwrap();
    let reduced = basis.project(&current);
    let lifted = basis.lift(&reduced);
    let cfg = PredictorConfig::new(5).unwrap();
    let sample = lookahead_sample(
        &model,
        &basis,
        &IndexSelection::all(128),
        &reduced,
        1e-3,
        &cfg,
        PredictorMode::Full,
    )
    .unwrap();
    let ahead = (&sample - &next).norm();
    let behind = (&lifted - &next).norm();
    assert!(ahead < 0.5 * behind, "lookahead {ahead:e} vs lifted {behind:e}");
}
