//! The shipped backends against the dense simplex oracle on small grids.

mod support;

use sphere_superres::solver::{solve, Backend, SolveConfig, SolveMode, SolveStatus};
use support::simplex::{l1min_objective, minimize, LpOutcome};

#[test]
fn simplex_textbook_problems() {
    // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  →  36 at (2, 6)
    let a = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]];
    match minimize(&[-3.0, -5.0], &a, &[4.0, 12.0, 18.0]) {
        LpOutcome::Optimal { x, objective } => {
            assert!((objective + 36.0).abs() < 1e-9);
            assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
    // x + y ≥ 2 with x + y ≤ 1
    let a = vec![vec![-1.0, -1.0], vec![1.0, 1.0]];
    assert!(matches!(minimize(&[1.0, 1.0], &a, &[-2.0, 1.0]), LpOutcome::Infeasible));
    assert!(matches!(minimize(&[-1.0, 0.0], &[vec![0.0, 1.0]], &[1.0]), LpOutcome::Unbounded));
}

fn compare(backend: Backend, l: usize, n: usize, seed: u64, rel_tol: f64) {
    let op = support::operator(l, n);
    let (_, m) = support::instance(&op, 1 + (seed % 2) as usize, 2, 20.0, seed);
    let oracle = l1min_objective(op.kernel(), m.s.values(), m.delta).expect("oracle LP feasible");
    let cfg = SolveConfig {
        backend,
        ..SolveConfig::new(m.delta, SolveMode::L1Min)
    };
    let res = solve(&m.s, &op, &cfg).unwrap();
    let rel = (res.objective - oracle).abs() / oracle.abs().max(1e-12);
    assert!(rel <= rel_tol, "{backend} seed {seed}: objective {} vs oracle {oracle} (rel {rel:.2e})", res.objective);
    if backend == Backend::InteriorPoint {
        assert_eq!(res.status, SolveStatus::Converged);
    }
}

#[test]
fn interior_point_matches_simplex() {
    for seed in 0..3 {
        compare(Backend::InteriorPoint, 10, 4, seed, 1e-6);
    }
}

#[test]
fn pdhg_matches_simplex() {
    compare(Backend::Pdhg, 8, 3, 7, 1e-3);
}

#[test]
fn interior_point_matches_simplex_at_largest_oracle_grid() {
    compare(Backend::InteriorPoint, 14, 6, 11, 1e-6);
}
