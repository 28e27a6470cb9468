//! Solver and certificate outputs against brute-force references.

mod common;

use eqsplit::problems::{
    build_cournot, build_op, build_rotation, build_strongly_pseudomonotone, CournotParams, OpParams,
};
use eqsplit::prox::{prox_generic, ProxRequest};
use eqsplit::verify::{brute_force_equilibrium, primal_residual};
use eqsplit::{
    run, Component, Error, FeasibleSet, FeasibleSet32, HarmonicScale, Matrix, Mode, SolverConfig,
    SolverConfig32, Vector, Vector32,
};

use common::{max_abs_diff, vector};

fn plain(c: f64, eps: f64) -> SolverConfig<f64> {
    SolverConfig::new(Mode::Plain, HarmonicScale::new(c).unwrap()).with_stop_eps(eps)
}

#[test]
fn cournot_brute_force_agrees_with_symmetric_solution() {
    for (n, step) in [(2, 0.5), (3, 2.5)] {
        let p = CournotParams::<f64>::standard(n);
        let inst = build_cournot(&p).unwrap();
        let grid = brute_force_equilibrium(&inst.bifunction, &inst.set, step).unwrap();
        let exact = p.symmetric_solution().unwrap();
        assert!(
            max_abs_diff(&grid, &exact) <= step,
            "n={n}: {grid:?} vs {exact:?}"
        );
    }
}

#[test]
fn strongly_pseudomonotone_brute_force_finds_origin() {
    let inst =
        build_strongly_pseudomonotone(2, 1.0, Vector::filled(2, -1.0), Vector::filled(2, 1.0))
            .unwrap();
    let grid = brute_force_equilibrium(&inst.bifunction, &inst.set, 0.1).unwrap();
    assert!(max_abs_diff(&grid, &[0.0, 0.0]) <= 0.1 + 1e-12, "{grid:?}");
}

#[test]
fn scalar_optimization_matches_grid_and_closed_form() {
    let p = OpParams {
        q: Matrix::diagonal(&[2.0]),
        box_lo: vector(&[0.0]),
        box_hi: vector(&[2.0]),
    };
    let inst = build_op(&p).unwrap();
    let closed_form = (3f64.sqrt() - 1.0) / 2.0;
    let grid = brute_force_equilibrium(&inst.bifunction, &inst.set, 1e-3).unwrap();
    assert!((grid[0] - closed_form).abs() <= 1e-3);
    assert!((inst.known_solution.as_ref().unwrap()[0] - closed_form).abs() <= 1e-12);
    let rep = run(&inst.bifunction, &inst.set, &inst.x0, &plain(1.0, 1e-7)).unwrap();
    assert!((rep.result[0] - closed_form).abs() <= 1e-3);
}

#[test]
fn residual_matches_grid_minimum() {
    let p = CournotParams::<f64>::standard(2);
    let inst = build_cournot(&p).unwrap();
    let f = &inst.bifunction;
    for xbar in [
        [30.0, 30.0],
        [25.0, 40.0],
        [10.0, 10.0 + 1e-9],
        [45.0, 45.0],
    ] {
        let xbar = vector(&xbar);
        if !inst.set.contains(&xbar, 1e-8) {
            continue;
        }
        let rho = primal_residual(f, &inst.set, &xbar, 1e-10).unwrap();
        let mut grid_min = 0.0f64;
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=steps {
                let y = [
                    10.0 + 40.0 * i as f64 / steps as f64,
                    10.0 + 40.0 * j as f64 / steps as f64,
                ];
                if inst.set.contains(&y, 1e-12) {
                    grid_min = grid_min.min(f.eval_sum(&xbar, &y).unwrap());
                }
            }
        }
        assert!(
            rho <= grid_min + 1e-9,
            "{xbar:?}: residual {rho} above grid {grid_min}"
        );
        assert!(
            rho >= grid_min - 1.0,
            "{xbar:?}: residual {rho} far below grid {grid_min}"
        );
    }
    let at_solution = primal_residual(f, &inst.set, &[30.0, 30.0], 1e-10).unwrap();
    assert!(at_solution.abs() <= 1e-9);
}

#[test]
fn rotation_residual_is_unbounded_off_the_origin() {
    let inst = build_rotation::<f64>();
    let rho = primal_residual(&inst.bifunction, &inst.set, &[1.0, 0.0], 1e-10).unwrap();
    assert_eq!(rho, f64::NEG_INFINITY);
}

#[test]
fn generic_prox_reports_exhaustion() {
    let set = FeasibleSet::whole_space(2).unwrap();
    let anchor = [5.0, -5.0];
    let req = ProxRequest::new(1.0, &anchor, &set).unwrap();
    let q = Component::GeneralQuadratic {
        q: Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
    };
    match prox_generic(&q, &anchor, &req, 1e-14, 3) {
        Err(Error::NoConvergence {
            iterations,
            residual,
        }) => {
            assert_eq!(iterations, 3);
            assert!(residual > 1e-14);
        }
        other => panic!("expected exhaustion, got {other:?}"),
    }
    let done = prox_generic(&q, &anchor, &req, 1e-10, 100_000).unwrap();
    // (I + Q) y = anchor with Q = [[2,1],[1,2]] gives y = (2.5, −2.5)
    assert!(
        max_abs_diff(&done.point, &[2.5, -2.5]) <= 1e-8,
        "{:?}",
        done.point
    );
    assert!(done.diagnostics.generic_residual.unwrap() <= 1e-10);
}

#[test]
fn single_precision_cournot_converges() {
    let p = CournotParams::<f32>::standard(2);
    let inst = build_cournot(&p).unwrap();
    let cfg: SolverConfig32 = SolverConfig::new(
        Mode::ErgodicWithRestart,
        HarmonicScale::new(10.0f32).unwrap(),
    );
    let set: &FeasibleSet32 = &inst.set;
    let x0: &Vector32 = &inst.x0;
    let rep = run(&inst.bifunction, set, x0, &cfg).unwrap();
    assert!(rep.result.iter().all(|&v| (v - 30.0).abs() <= 1e-2));
}

#[test]
fn cournot_is_not_monotone_but_solution_is_dual() {
    let p = CournotParams::<f64>::standard(2);
    let inst = build_cournot(&p).unwrap();
    let f = &inst.bifunction;
    // d = x − y = (10, −10) is orthogonal to 1, so f(x,y) + f(y,x) = ‖d‖² − (Σd)² = 200
    let (x, y) = ([35.0, 25.0], [25.0, 35.0]);
    let s = f.eval_sum(&x, &y).unwrap() + f.eval_sum(&y, &x).unwrap();
    assert!((s - 200.0).abs() <= 1e-9, "{s}");
    assert!(!inst.monotone);

    let star = p.symmetric_solution().unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
    let checks =
        eqsplit::verify::sample_properties(f, &inst.set, Some(&star), 500, &mut rng).unwrap();
    assert!(checks.monotonicity > 0.0);
    assert!(checks.dual_gap.unwrap() <= 1e-9);
}
