mod common;

use adeim_core::rom::{eim_reconstruct, qdeim_points, qdeim_points_oversampled, IndexSelection};
use nalgebra::DVector;
use proptest::prelude::*;

use common::{random_basis, rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interpolation_reproduces_vectors_in_the_span(
        seed in any::<u64>(),
        dim in 10usize..64,
        n in 1usize..8,
        extra in 0usize..6,
    ) {
        let mut r = rng(seed);
        let basis = random_basis(&mut r, dim, n);
        let m = (n + extra).min(dim);
        let points = qdeim_points_oversampled(&basis, m).unwrap();
        prop_assert_eq!(points.len(), m);
        let c = DVector::from_fn(n, |i, _| (i as f64 + 1.0) * if seed % 2 == 0 { 1.0 } else { -0.5 });
        let x = basis.lift(&c);
        let rebuilt = eim_reconstruct(&basis, &points, &points.gather(&x)).unwrap();
        prop_assert!((rebuilt - &x).norm() <= 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn oversampling_extends_the_qdeim_points(
        seed in any::<u64>(),
        dim in 10usize..40,
        n in 1usize..6,
    ) {
        let mut r = rng(seed);
        let basis = random_basis(&mut r, dim, n);
        let base = qdeim_points(&basis).unwrap();
        let over = qdeim_points_oversampled(&basis, (2 * n).min(dim)).unwrap();
        prop_assert_eq!(&over.as_slice()[..n], base.as_slice());
        let mut sorted = over.as_slice().to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), over.len());
    }
}

#[test]
fn qdeim_rows_are_well_conditioned() {
    let mut r = rng(3);
    let basis = random_basis(&mut r, 64, 6);
    let points = qdeim_points(&basis).unwrap();
    let rows = basis.rows(points.as_slice());
    let sv = rows.singular_values();
    let cond = sv.max() / sv.min();
    // Known QDEIM bound: ‖V[p,:]⁻¹‖ ≤ sqrt(N − n + 1) · O(2ⁿ).
    assert!(cond < (64.0f64).sqrt() * 64.0, "condition number {cond}");
}

#[test]
fn all_points_interpolate_any_vector_by_projection() {
    let mut r = rng(5);
    let basis = random_basis(&mut r, 20, 4);
    let all = IndexSelection::all(20);
    let x = DVector::from_fn(20, |i, _| (i as f64).sin());
    let rebuilt = eim_reconstruct(&basis, &all, &x).unwrap();
    let projected = basis.lift(&basis.project(&x));
    assert!((rebuilt - projected).norm() < 1e-12);
}
