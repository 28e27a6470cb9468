//! Randomised properties of the subsolvers, the solver loop, and traces.

mod common;

use eqsplit::linalg::{dist, dot};
use eqsplit::problems::{build_cournot, build_rotation, random_feasible_point, CournotParams};
use eqsplit::prox::{prox_affine, prox_component, prox_diag_quad, ProxRequest};
use eqsplit::trace::{read_csv, read_jsonl, write_csv, write_jsonl};
use eqsplit::verify::sample_properties;
use eqsplit::{
    run, step_size, Component, FeasibleSet, HarmonicScale, Matrix, Mode, SolverConfig, Vector,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::vector;

const FEASIBILITY_TOL: f64 = 1e-8;

/// A box `[lo, lo + width]` with an optional sum window inside its range.
fn region(dim: usize) -> impl Strategy<Value = FeasibleSet<f64>> {
    (
        prop::collection::vec((-3.0..1.0f64, 0.2..3.0f64), dim),
        0.0..1.0f64,
        0.0..1.0f64,
        any::<bool>(),
    )
        .prop_map(|(sides, a, b, coupled)| {
            let lo: Vec<f64> = sides.iter().map(|s| s.0).collect();
            let hi: Vec<f64> = sides.iter().map(|s| s.0 + s.1).collect();
            if coupled {
                let (smin, smax): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
                let (a, b) = (a.min(b), a.max(b));
                FeasibleSet::box_sum(
                    vector(&lo),
                    vector(&hi),
                    smin + a * (smax - smin),
                    smin + b * (smax - smin),
                )
                .unwrap()
            } else {
                FeasibleSet::boxed(vector(&lo), vector(&hi)).unwrap()
            }
        })
}

fn instance() -> impl Strategy<Value = (FeasibleSet<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (1usize..6).prop_flat_map(|n| {
        (
            region(n),
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(0.0..3.0f64, n),
            0.01..4.0f64,
        )
    })
}

/// `‖y − anchor‖²/2 + λ φ(y)` for a diagonal quadratic plus linear term.
fn prox_objective(lambda: f64, c: &[f64], delta: &[f64], anchor: &[f64], y: &[f64]) -> f64 {
    let quad: f64 = y.iter().zip(delta).map(|(v, d)| d * v * v).sum();
    0.5 * dist(y, anchor).powi(2) + lambda * (dot(c, y) + quad)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prox_outputs_are_feasible_and_optimal((set, anchor, c, delta, lambda) in instance()) {
        let req = ProxRequest::new(lambda, &anchor, &set).unwrap();
        let zeros = vec![0.0; anchor.len()];
        let cases = [
            (prox_affine(&c, &req).unwrap(), c.clone(), zeros.clone()),
            (prox_diag_quad(&delta, &req).unwrap(), zeros, delta.clone()),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(anchor.len() as u64);
        for (y, coef, quad) in cases {
            prop_assert!(set.contains(&y, FEASIBILITY_TOL));
            let best = prox_objective(lambda, &coef, &quad, &anchor, &y);
            for _ in 0..20 {
                let w = random_feasible_point(&set, &mut rng).unwrap();
                prop_assert!(best <= prox_objective(lambda, &coef, &quad, &anchor, &w) + 1e-9);
            }
        }
    }

    #[test]
    fn projection_is_nonexpansive(
        (set, a, b, _, _) in instance(),
    ) {
        let pa = set.project(&a).unwrap();
        let pb = set.project(&b).unwrap();
        prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-9);
    }

    #[test]
    fn affine_prox_is_shifted_projection((set, anchor, c, _, lambda) in instance()) {
        let req = ProxRequest::new(lambda, &anchor, &set).unwrap();
        let shifted: Vec<f64> = anchor.iter().zip(&c).map(|(a, ci)| a - lambda * ci).collect();
        let y = prox_affine(&c, &req).unwrap();
        prop_assert!(dist(&y, &set.project(&shifted).unwrap()) <= 1e-9);
    }

    #[test]
    fn dense_quadratic_prox_matches_diagonal_solver((set, anchor, _, delta, lambda) in instance()) {
        let q = Matrix::diagonal(&delta.iter().map(|d| 2.0 * d).collect::<Vec<_>>());
        let dense = Component::Smooth(std::sync::Arc::new(DenseQuad(q)));
        let req = ProxRequest::new(lambda, &anchor, &set).unwrap();
        let generic = prox_component(&dense, &anchor, &req).unwrap().point;
        let exact = prox_diag_quad(&delta, &req).unwrap();
        prop_assert!(dist(&generic, &exact) <= 1e-7);
    }

    #[test]
    fn step_weights_lie_in_unit_interval(
        beta in 1e-6..100.0f64,
        g1 in prop::collection::vec(-50.0..50.0f64, 1..6),
        scale in -2.0..2.0f64,
    ) {
        let g2: Vec<f64> = g1.iter().map(|v| v * scale).collect();
        let (eta, lambda) = step_size(beta, &g1, &g2).unwrap();
        prop_assert!(lambda > 0.0 && lambda <= 1.0);
        prop_assert!(eta >= beta);
    }

    #[test]
    fn cournot_core_invariants(n in 2usize..7, seed in any::<u64>()) {
        let p = CournotParams::<f64>::standard(n);
        let inst = build_cournot(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let star = p.symmetric_solution().unwrap();
        let checks = sample_properties(&inst.bifunction, &inst.set, Some(&star), 30, &mut rng).unwrap();
        prop_assert!(checks.diagonal <= 1e-9);
        prop_assert!(checks.subgradient_gap >= -1e-7);
        prop_assert!(checks.dual_gap.unwrap() <= 1e-7);
    }
}

/// `½ (y−x)ᵀ Q (y+x)`, i.e. `½yᵀQy − ½xᵀQx`, through the smooth interface.
#[derive(Debug)]
struct DenseQuad(Matrix<f64>);

impl eqsplit::SmoothBifunction<f64> for DenseQuad {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * (self.0.quad_form(y) - self.0.quad_form(x))
    }
    fn grad_y(&self, _x: &[f64], y: &[f64]) -> Vector<f64> {
        self.0.mul_vec(y)
    }
    fn smoothness(&self) -> f64 {
        self.0.max_abs_row_sum()
    }
}

fn cournot_report(mode: Mode) -> eqsplit::SolveReport<f64> {
    let inst = build_cournot(&CournotParams::<f64>::standard(4)).unwrap();
    let cfg = SolverConfig::new(mode, HarmonicScale::new(10.0).unwrap());
    run(&inst.bifunction, &inst.set, &inst.x0, &cfg).unwrap()
}

#[test]
fn records_respect_weights_and_feasibility() {
    let inst = build_cournot(&CournotParams::<f64>::standard(4)).unwrap();
    for mode in [Mode::Plain, Mode::Ergodic, Mode::ErgodicWithRestart] {
        let rep = cournot_report(mode);
        let mut prefix = 0.0;
        for r in &rep.trace {
            assert!(r.lambda > 0.0 && r.lambda <= 1.0);
            if r.restarted {
                prefix = 0.0;
            }
            let next = prefix + r.lambda;
            assert!(next > prefix);
            prefix = next;
            for point in [&r.x, &r.y, &r.x_next] {
                assert!(inst.set.contains(point, FEASIBILITY_TOL));
            }
            if mode != Mode::Plain {
                assert!(inst.set.contains(&r.z, FEASIBILITY_TOL));
            }
        }
    }
}

#[test]
fn identical_runs_give_identical_traces() {
    let a = cournot_report(Mode::ErgodicWithRestart);
    let b = cournot_report(Mode::ErgodicWithRestart);
    assert_eq!(a.trace, b.trace);
    let bits = |r: &eqsplit::SolveReport<f64>| -> Vec<u64> {
        r.trace
            .iter()
            .flat_map(|t| t.x_next.iter().map(|v| v.to_bits()))
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn traces_round_trip_through_both_formats() {
    let rep = cournot_report(Mode::ErgodicWithRestart);
    let mut csv = Vec::new();
    write_csv(&rep.trace, &mut csv).unwrap();
    assert_eq!(read_csv::<f64, _>(csv.as_slice()).unwrap(), rep.trace);
    let mut jsonl = Vec::new();
    write_jsonl(&rep.trace, &mut jsonl).unwrap();
    assert_eq!(read_jsonl::<f64, _>(jsonl.as_slice()).unwrap(), rep.trace);
}

#[test]
fn rotation_is_skew() {
    let inst = build_rotation::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let big = FeasibleSet::boxed(Vector::filled(2, -10.0), Vector::filled(2, 10.0)).unwrap();
    let checks = sample_properties(&inst.bifunction, &big, None, 200, &mut rng).unwrap();
    assert!(checks.monotonicity.abs() <= 1e-12);
    let (x, y) = ([0.3, -1.2], [2.0, 0.5]);
    let s = inst.bifunction.eval_sum(&x, &y).unwrap() + inst.bifunction.eval_sum(&y, &x).unwrap();
    assert!(s.abs() <= 1e-12);
}
