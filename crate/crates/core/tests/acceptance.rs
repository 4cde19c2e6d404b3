//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the verdicts appear in the
//! output of `cargo test`. Criteria 4 to 6 integrate the full detonation-wave
//! benchmark and take several minutes.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use adeim_core::adaptation::rank1_update;
use adeim_core::driver::{bench, compare, compare_variants, AdeimSettings, RunConfig, Strategy};
use adeim_core::linalg::thin_svd;
use adeim_core::models::{
    implicit_euler_step, rde_initial_condition, Dynamics, Grid1D, LinearModel, NewtonOptions,
    TimeGrid,
};
use adeim_core::rom::{eim_reconstruct, qdeim_points};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::{als_best, rde, random_basis, random_matrix, rng};

struct Verdict {
    pass: Option<bool>,
    detail: String,
}

impl Verdict {
    fn check(pass: bool, detail: String) -> Self {
        Self {
            pass: Some(pass),
            detail,
        }
    }

    fn info(detail: String) -> Self {
        Self { pass: None, detail }
    }
}

fn rank1_optimality() -> Verdict {
    let mut r = rng(1);
    let mut worst = f64::NEG_INFINITY;
    for instance in 0..50 {
        let dim = r.gen_range(4..=12);
        let n = r.gen_range(1..=4);
        let w = r.gen_range(1..=6);
        let basis = random_basis(&mut r, dim, n);
        let f = random_matrix(&mut r, dim, w);
        let update = rank1_update(&basis, &f).expect("valid instance");
        let oracle = als_best(basis.matrix(), &f, 10, 300, instance);
        worst = worst.max(update.objective_after - oracle);
    }
    Verdict::check(
        worst <= 1e-7,
        format!("50 instances, max(closed form - ALS) = {worst:.3e} (limit 1e-7)"),
    )
}

fn interpolation_exactness() -> Verdict {
    let mut r = rng(2);
    let (mut worst_err, mut worst_sigma) = (0.0f64, f64::INFINITY);
    for _ in 0..20 {
        let n = r.gen_range(1..=8);
        let basis = random_basis(&mut r, 64, n);
        let points = qdeim_points(&basis).expect("qdeim");
        let sigma = thin_svd(&basis.rows(points.as_slice())).expect("svd").singular_values;
        worst_sigma = worst_sigma.min(sigma[n - 1]);
        let x = basis.lift(&DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0)));
        let rebuilt = eim_reconstruct(&basis, &points, &points.gather(&x)).expect("lift");
        worst_err = worst_err.max((rebuilt - &x).norm() / x.norm());
    }
    Verdict::check(
        worst_err <= 1e-9 && worst_sigma > 1e-8,
        format!(
            "20 bases, max relative error {worst_err:.3e} (limit 1e-9), min sigma(V[p,:]) {worst_sigma:.3e}"
        ),
    )
}

fn full_dimension_degeneracy() -> Verdict {
    let mut cfg = RunConfig::default();
    cfg.grid_points = 32;
    cfg.record_stride = 1;
    cfg.time = TimeGrid::new(1e-3, 114).unwrap();
    cfg.rom = AdeimSettings {
        n: 64,
        w_init: 64,
        sampling_points: Some(64),
        interpolation_points: Some(64),
        ..AdeimSettings::default()
    };
    match compare::<f64>(&cfg) {
        Ok(c) => {
            let diff = (&c.rom.states - &c.fom.states)
                .column_iter()
                .zip(c.fom.states.column_iter())
                .map(|(d, q)| d.norm() / q.norm())
                .fold(0.0, f64::max);
            Verdict::check(
                c.rom.failure.is_none() && diff <= 1e-8,
                format!("M=32, n=m=m_s=64, 50 reduced steps, max relative deviation {diff:.3e} (limit 1e-8)"),
            )
        }
        Err(e) => Verdict::check(false, format!("run failed: {e}")),
    }
}

fn paper_config() -> RunConfig {
    RunConfig {
        record_stride: 50_000,
        ..RunConfig::default()
    }
}

fn describe(error: f64, failure: Option<usize>) -> String {
    match failure {
        Some(step) => format!("unstable at step {step}"),
        None => format!("{error:.4e}"),
    }
}

/// Criteria 4 and 5 share one full-model reference run.
fn paper_experiment_and_trends() -> (Verdict, Verdict) {
    let cfg = paper_config();
    let base = cfg.rom.clone();
    let variants = vec![
        base.clone(),
        AdeimSettings {
            strategy: Strategy::Lookback,
            ..base.clone()
        },
        AdeimSettings { z: 2, ..base.clone() },
        AdeimSettings { z: 4, ..base.clone() },
        AdeimSettings {
            sampling_fraction: 0.3,
            ..base.clone()
        },
    ];
    let start = Instant::now();
    let run = match compare_variants::<f64>(&cfg, &variants) {
        Ok(run) => run,
        Err(e) => {
            let v = Verdict::check(false, format!("run failed: {e}"));
            return (v, Verdict::check(false, "no reference run".into()));
        }
    };
    let results: Vec<(f64, String)> = run
        .variants
        .iter()
        .map(|v| {
            let failure = v.trajectory.failure.as_ref().map(|f| f.step);
            (v.error, describe(v.error, failure))
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let (ahead, back) = (&results[0], &results[1]);
    let criterion4 = Verdict::check(
        ahead.0 <= 0.15 && ahead.0 < back.0,
        format!(
            "lookahead {} (limit 0.15), lookback {} ({secs:.0} s for 1 full + 5 reduced runs)",
            ahead.1, back.1
        ),
    );
    let (z2, z4, ms30) = (&results[2], &results[3], &results[4]);
    let trend = |a: f64, b: f64| a <= b || (a <= 0.06 && b <= 0.06);
    let criterion5 = Verdict::check(
        trend(z2.0, z4.0) && trend(ahead.0, ms30.0),
        format!(
            "z=2 {} vs z=4 {}; m_s=50% {} vs m_s=30% {}",
            z2.1, z4.1, ahead.1, ms30.1
        ),
    );
    (criterion4, criterion5)
}

fn bifurcation_agreement() -> Verdict {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for mu in [2.0, 3.5, 5.0] {
        let mut cfg = paper_config();
        cfg.model.mu = mu;
        match compare_variants::<f64>(&cfg, std::slice::from_ref(&cfg.rom)) {
            Ok(run) => {
                let fom = run.fom_final_max_eta;
                let rel = match run.variants[0].final_max_eta {
                    Some(rom) => (rom - fom).abs() / fom,
                    None => f64::INFINITY,
                };
                worst = worst.max(rel);
                parts.push(format!("mu={mu}: {rel:.2e}"));
            }
            Err(e) => {
                worst = f64::INFINITY;
                parts.push(format!("mu={mu}: {e}"));
            }
        }
    }
    Verdict::check(
        worst <= 0.1,
        format!("relative max-eta difference {} (limit 0.1)", parts.join(", ")),
    )
}

fn speedup() -> Verdict {
    let mut cfg = RunConfig::default();
    cfg.grid_points = 2048;
    cfg.time = TimeGrid::new(1e-3, 2500).unwrap();
    match bench(&cfg, 1) {
        Ok(r) => Verdict::info(format!(
            "M=2048, K=2500: FOM {:.1} s, ROM {:.1} s, speedup {:.2} (reference band {}-{}, single thread)",
            r.fom_secs[0], r.rom_secs[0], r.median, r.reference_band.0, r.reference_band.1
        )),
        Err(e) => Verdict::info(format!("benchmark failed: {e}")),
    }
}

fn solver_correctness() -> Verdict {
    // Jacobian columns against central differences at random states. η stays
    // positive so the upwind switch at η = 0 is not straddled.
    let model = rde(16);
    let mut r = rng(8);
    let mut jac_err = 0.0f64;
    let mut row = Vec::new();
    for _ in 0..20 {
        let q = DVector::from_fn(32, |i, _| {
            if i < 16 {
                r.gen_range(0.2..3.0)
            } else {
                r.gen_range(0.0..1.0)
            }
        });
        let mut jac = DMatrix::<f64>::zeros(32, 32);
        for i in 0..32 {
            row.clear();
            model.jacobian_row(q.as_slice(), i, &mut row);
            for &(c, v) in &row {
                jac[(i, c)] += v;
            }
        }
        let h = 1e-6;
        for col in 0..32 {
            let (mut plus, mut minus) = (q.clone(), q.clone());
            plus[col] += h;
            minus[col] -= h;
            let fd = DVector::from_fn(32, |i, _| {
                (model.rhs_component(plus.as_slice(), i) - model.rhs_component(minus.as_slice(), i))
                    / (2.0 * h)
            });
            let exact = jac.column(col);
            jac_err = jac_err.max((fd - exact).norm() / (1.0 + exact.norm()));
        }
    }

    // Convergence order on dq/dt = A q with a rotation-plus-decay operator.
    let a = DMatrix::from_row_slice(2, 2, &[-0.5, 2.0, -2.0, -0.5]);
    let linear = LinearModel::new(a.clone());
    let q0 = DVector::from_vec(vec![1.0, 0.0]);
    let t_end = 1.0;
    let exact = (a * t_end).exp() * &q0;
    let opts = NewtonOptions::default();
    let errors: Vec<f64> = [100usize, 200, 400]
        .iter()
        .map(|&k| {
            let dt = t_end / k as f64;
            let mut x = q0.clone();
            for _ in 0..k {
                x = implicit_euler_step(&linear, &x, dt, &opts).unwrap().state;
            }
            (x - &exact).norm()
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|p| p[0] / p[1]).collect();

    // Residual of every accepted step of a detonation run.
    let rde_model = rde(32);
    let mut residual = 0.0f64;
    let mut x = rde_initial_condition::<f64>(&Grid1D::new(32).unwrap());
    for _ in 0..200 {
        let report = implicit_euler_step(&rde_model, &x, 1e-3, &opts).unwrap();
        residual = residual.max(report.residual);
        x = report.state;
    }

    let pass = jac_err <= 1e-5 && ratios.iter().all(|r| (r - 2.0).abs() <= 0.2) && residual <= 1e-10;
    Verdict::check(
        pass,
        format!(
            "Jacobian FD error {jac_err:.2e} (limit 1e-5), convergence ratios {ratios:.3?} (2 +- 0.2), max Newton residual {residual:.2e} (limit 1e-10)"
        ),
    )
}

/// Criterion numbers given on the command line select a subset, e.g.
/// `cargo test --test acceptance -- 3 8`.
fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: usize| selected.is_empty() || selected.contains(&id);
    let single: [(usize, &str, fn() -> Verdict); 6] = [
        (1, "1 rank-1 optimality", rank1_optimality),
        (2, "2 interpolation exactness", interpolation_exactness),
        (3, "3 full-dimension degeneracy", full_dimension_degeneracy),
        (6, "6 bifurcation agreement", bifurcation_agreement),
        (7, "7 speedup", speedup),
        (8, "8 solver correctness", solver_correctness),
    ];
    let mut criteria: Vec<(&str, Verdict)> = Vec::new();
    for (id, name, run) in single {
        if id == 6 && (wanted(4) || wanted(5)) {
            let (c4, c5) = paper_experiment_and_trends();
            criteria.push(("4 paper experiment error band", c4));
            criteria.push(("5 sensitivity trends", c5));
        }
        if wanted(id) {
            criteria.push((name, run()));
        }
    }
    let mut failed = 0;
    for (name, v) in &criteria {
        let tag = match v.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "INFO",
        };
        println!("{tag} [{name}] {}", v.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
