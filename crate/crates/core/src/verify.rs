//! Solution certificates and independent checks.
//!
//! A point `x̄` solves the equilibrium problem iff `min_{y∈S} f(x̄, y) ≥ 0`.
//! Because `f(x̄, ·)` is convex this minimum is computable, and since
//! `f(x̄, x̄) = 0` it is never positive: the *primal residual* `ρ ≤ 0`
//! measures how far `x̄` is from being an equilibrium. The dual residual
//! `sup_y f(y, x̄)` would need a nonconcave maximisation and is not computed;
//! under convexity, upper semicontinuity and monotonicity the two solution
//! sets coincide.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dist, dist_sq, dot, sub, Vector};
use crate::model::{Component, FeasibleSet, SplitBifunction};
use crate::problems::random_feasible_point;
use crate::prox::{prox_log, prox_log_1d, weighted_projection, ProxRequest};
use crate::scalar::Scalar;
use crate::solver::IterationRecord;

/// Proximity weights tried in turn by [`primal_residual`].
pub const CONTINUATION: [f64; 3] = [1e-2, 1e-4, 0.0];
const RESIDUAL_MAX_ITER: usize = 100_000;

/// `f(x̄, ·)` collected into `c·y + Σδ_i y_i² + Σ smooth + s·Σ −ln(1+y_i⁺)`
/// plus a constant that does not affect the minimiser.
struct Collected<'a, T> {
    linear: Vector<T>,
    diag: Vector<T>,
    smooth: Vec<&'a Component<T>>,
    log_scale: T,
}

fn collect<'a, T: Scalar>(f: &'a SplitBifunction<T>, xbar: &[T]) -> Collected<'a, T> {
    let n = xbar.len();
    let mut out = Collected {
        linear: Vector::zeros(n),
        diag: Vector::zeros(n),
        smooth: Vec::new(),
        log_scale: T::zero(),
    };
    let half = T::lit(0.5);
    for c in f.components() {
        match c {
            Component::Zero => {}
            Component::Affine { .. } => {
                for (l, v) in out.linear.iter_mut().zip(c.affine_coefficient(xbar).iter()) {
                    *l = *l + *v;
                }
            }
            Component::DiagonalQuadratic { delta } => {
                for (d, &v) in out.diag.iter_mut().zip(delta.iter()) {
                    *d = *d + v;
                }
            }
            Component::GeneralQuadratic { q } => match q.as_diagonal() {
                Some(qd) => {
                    for (d, v) in out.diag.iter_mut().zip(qd) {
                        *d = *d + half * v;
                    }
                }
                None => out.smooth.push(c),
            },
            Component::SeparableLogBarrier { scale } => out.log_scale = out.log_scale + *scale,
            Component::Smooth(_) => out.smooth.push(c),
        }
    }
    out
}

/// Approximate minimiser of `f(x̄, y) + eps‖y − x̄‖²` over the set.
fn regularized_minimizer<T: Scalar>(
    f: &SplitBifunction<T>,
    set: &FeasibleSet<T>,
    xbar: &[T],
    eps: T,
    tol: T,
) -> Result<Option<Vector<T>>> {
    let parts = collect(f, xbar);
    let two = T::lit(2.0);
    let n = xbar.len();
    let weights: Vec<T> = parts.diag.iter().map(|&d| d + eps).collect();
    let shifted: Vec<T> = (0..n)
        .map(|i| parts.linear[i] - two * eps * xbar[i])
        .collect();
    let strictly = weights.iter().all(|&w| w > T::zero());

    if parts.smooth.is_empty() && strictly {
        // Σ w_i y_i² + c̃·y  =  Σ w_i (y_i − t_i)² + const
        let t: Vec<T> = (0..n).map(|i| -shifted[i] / (two * weights[i])).collect();
        if parts.log_scale == T::zero() {
            let d: Vec<T> = weights.iter().map(|&w| two * w).collect();
            return weighted_projection(&d, &t, set).map(|(y, _)| Some(y));
        }
        if !matches!(set, FeasibleSet::BoxSum { .. }) {
            let (lo, hi) = set.bounds();
            return Ok(Some(
                (0..n)
                    .map(|i| prox_log_1d(parts.log_scale / (two * weights[i]), t[i], lo[i], hi[i]))
                    .collect(),
            ));
        }
    }
    if !set.is_bounded()
        && parts.smooth.is_empty()
        && (0..n).any(|i| weights[i] == T::zero() && shifted[i] != T::zero())
    {
        // linear and unbounded below along a coordinate axis
        return Ok(None);
    }
    accelerated_minimizer(f, set, xbar, &parts, eps, tol).map(Some)
}

/// FISTA on the smooth part, prox of the log term plus region indicator.
fn accelerated_minimizer<T: Scalar>(
    f: &SplitBifunction<T>,
    set: &FeasibleSet<T>,
    xbar: &[T],
    parts: &Collected<'_, T>,
    eps: T,
    tol: T,
) -> Result<Vector<T>> {
    let two = T::lit(2.0);
    let n = xbar.len();
    let mut lipschitz = two * eps;
    lipschitz = lipschitz
        + parts
            .diag
            .iter()
            .fold(T::zero(), |m, &d| m.max(two * d.abs()));
    for c in &parts.smooth {
        lipschitz = lipschitz + c.smoothness().unwrap_or(T::zero());
    }
    let step = T::one() / lipschitz.max(T::one());
    let grad = |y: &[T]| -> Vector<T> {
        let mut g: Vector<T> = (0..n)
            .map(|i| parts.linear[i] + two * parts.diag[i] * y[i] + two * eps * (y[i] - xbar[i]))
            .collect();
        for c in &parts.smooth {
            let gc = c.smooth_gradient(xbar, y).expect("smooth summand");
            for (a, b) in g.iter_mut().zip(gc.iter()) {
                *a = *a + *b;
            }
        }
        g
    };
    let prox = |p: &[T]| -> Result<Vector<T>> {
        if parts.log_scale == T::zero() {
            set.project(p)
        } else {
            prox_log(parts.log_scale, &ProxRequest::new(step, p, set)?).map(|o| o.point)
        }
    };
    let value = |y: &[T]| f.eval1(xbar, y) + f.eval2(xbar, y);

    let mut y = set.project(xbar)?;
    let mut best = y.clone();
    let mut best_val = value(&y);
    let mut w = y.clone();
    let mut t_k = T::one();
    for _ in 0..RESIDUAL_MAX_ITER {
        let g = grad(&w);
        let next = prox(
            &w.iter()
                .zip(g.iter())
                .map(|(&a, &b)| a - step * b)
                .collect::<Vec<_>>(),
        )?;
        let moved = dist(&next, &w) / step;
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t_k * t_k).sqrt()) / two;
        let momentum = (t_k - T::one()) / t_next;
        w = next
            .iter()
            .zip(y.iter())
            .map(|(&a, &b)| a + momentum * (a - b))
            .collect();
        y = next;
        t_k = t_next;
        let v = value(&y);
        if !v.is_finite() {
            return Err(Error::NonFinite("residual subproblem"));
        }
        if v < best_val {
            best_val = v;
            best = y.clone();
        }
        if moved <= tol {
            break;
        }
    }
    Ok(best)
}

/// `ρ = min_{y∈S} f(x̄, y)`, estimated from above by minimising
/// `f(x̄, y) + ε‖y − x̄‖²` for each `ε` in [`CONTINUATION`] and keeping the
/// smallest `f(x̄, y_ε)`. `-∞` when `f(x̄, ·)` is unbounded below.
pub fn primal_residual<T: Scalar>(
    f: &SplitBifunction<T>,
    set: &FeasibleSet<T>,
    xbar: &[T],
    tol: T,
) -> Result<T> {
    check_dim(f.dim(), xbar.len())?;
    check_dim(f.dim(), set.dim())?;
    if !set.contains(xbar, T::lit(1e-8)) {
        return Err(Error::InvalidParameter(
            "residual point must be feasible".into(),
        ));
    }
    let mut rho = T::zero();
    for eps in CONTINUATION {
        match regularized_minimizer(f, set, xbar, T::lit(eps), tol)? {
            Some(y) => rho = rho.min(f.eval1(xbar, &y) + f.eval2(xbar, &y)),
            None => return Ok(T::neg_infinity()),
        }
    }
    Ok(rho)
}

/// `x̄` is an `eps`-solution when its primal residual is at least `−eps`.
pub fn is_certified<T: Scalar>(residual: T, eps: T) -> bool {
    residual >= -eps
}

fn grid_axis<T: Scalar>(lo: T, hi: T, step: T) -> Vec<T> {
    let count = ((hi - lo) / step + T::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0);
    (0..=count)
        .map(|k| (lo + step * T::from_usize_lossy(k)).min(hi))
        .collect()
}

/// Grid point `x̂` maximising `min_{grid y} f(x̂, y)`. Test oracle for
/// `n ≤ 3` on bounded regions.
pub fn brute_force_equilibrium<T: Scalar>(
    f: &SplitBifunction<T>,
    set: &FeasibleSet<T>,
    grid_step: T,
) -> Result<Vector<T>> {
    let n = set.dim();
    if n > 3 {
        return Err(Error::Unsupported(format!(
            "brute force limited to n ≤ 3, got {n}"
        )));
    }
    if !set.is_bounded() {
        return Err(Error::Unsupported(
            "brute force needs a bounded region".into(),
        ));
    }
    if !(grid_step > T::zero()) {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    check_dim(f.dim(), n)?;
    let (lo, hi) = set.bounds();
    let axes: Vec<Vec<T>> = (0..n).map(|i| grid_axis(lo[i], hi[i], grid_step)).collect();
    let mut points: Vec<Vec<T>> = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    let tol = grid_step * T::lit(1e-9);
    points.retain(|p| set.contains(p, tol));
    if points.is_empty() {
        return Err(Error::Infeasible("no grid point inside the region".into()));
    }
    let mut best = 0;
    let mut best_val = T::neg_infinity();
    for (i, x) in points.iter().enumerate() {
        let mut worst = T::infinity();
        for y in &points {
            worst = worst.min(f.eval1(x, y) + f.eval2(x, y));
            if worst <= best_val {
                break;
            }
        }
        if worst > best_val {
            best_val = worst;
            best = i;
        }
    }
    Ok(Vector::from_vec_unchecked(points.swap_remove(best)))
}

/// `max_k ‖x^{k+1} − x*‖² − ‖x^k − x*‖² − 2β_k²`; nonpositive when every
/// step respects the distance bound.
pub fn fejer_monitor<T: Scalar>(trace: &[IterationRecord<T>], xstar: &[T]) -> T {
    let two = T::lit(2.0);
    trace
        .iter()
        .map(|r| dist_sq(&r.x_next, xstar) - dist_sq(&r.x, xstar) - two * r.beta * r.beta)
        .fold(T::neg_infinity(), T::max)
}

/// `max_k ‖x^{k+1} − x*‖² − (1 − 2·modulus·λ_k)‖x^k − x*‖² − 2β_k²`, the
/// contraction bound for strongly pseudomonotone problems.
pub fn decay_monitor<T: Scalar>(trace: &[IterationRecord<T>], xstar: &[T], modulus: T) -> T {
    let two = T::lit(2.0);
    trace
        .iter()
        .map(|r| {
            dist_sq(&r.x_next, xstar)
                - (T::one() - two * modulus * r.lambda) * dist_sq(&r.x, xstar)
                - two * r.beta * r.beta
        })
        .fold(T::neg_infinity(), T::max)
}

/// Worst values seen by [`sample_properties`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledChecks<T> {
    /// `max |f_i(x, x)|`.
    pub diagonal: T,
    /// `min f_i(x, y) − ⟨g_i(x), y − x⟩`; nonnegative for valid subgradients.
    pub subgradient_gap: T,
    /// `max f(x, y) + f(y, x)`; nonpositive for monotone bifunctions.
    pub monotonicity: T,
    /// `max f(x, x*)` over samples when a solution is supplied.
    pub dual_gap: Option<T>,
}

/// Samples `count` random feasible pairs and records the worst violation of
/// each structural property.
pub fn sample_properties<T: Scalar, R: Rng + ?Sized>(
    f: &SplitBifunction<T>,
    set: &FeasibleSet<T>,
    solution: Option<&[T]>,
    count: usize,
    rng: &mut R,
) -> Result<SampledChecks<T>> {
    let mut out = SampledChecks {
        diagonal: T::zero(),
        subgradient_gap: T::infinity(),
        monotonicity: T::neg_infinity(),
        dual_gap: solution.map(|_| T::neg_infinity()),
    };
    for _ in 0..count {
        let x = random_feasible_point(set, rng)?;
        let y = random_feasible_point(set, rng)?;
        for c in f.components() {
            out.diagonal = out.diagonal.max(c.eval(&x, &x).abs());
            let gap = c.eval(&x, &y) - dot(&c.diag_subgradient(&x), &sub(&y, &x));
            out.subgradient_gap = out.subgradient_gap.min(gap);
        }
        out.monotonicity = out
            .monotonicity
            .max(f.eval_sum(&x, &y)? + f.eval_sum(&y, &x)?);
        if let (Some(xs), Some(g)) = (solution, out.dual_gap.as_mut()) {
            *g = g.max(f.eval_sum(&x, xs)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problems::{build_cournot, build_op, build_rotation, CournotParams, OpParams};

    #[test]
    fn residual_nonpositive_and_zero_at_rotation_origin() {
        let inst = build_rotation::<f64>();
        let r = primal_residual(&inst.bifunction, &inst.set, &[0.0, 0.0], 1e-10).unwrap();
        assert_eq!(r, 0.0);
        let r = primal_residual(&inst.bifunction, &inst.set, &[1.0, 0.0], 1e-10).unwrap();
        assert_eq!(r, f64::NEG_INFINITY);
    }

    #[test]
    fn residual_cournot_solution() {
        let inst = build_cournot(&CournotParams::<f64>::standard(2)).unwrap();
        let r = primal_residual(&inst.bifunction, &inst.set, &[30.0, 30.0], 1e-10).unwrap();
        assert!((-1e-6..=0.0).contains(&r), "{r}");
        let r = primal_residual(&inst.bifunction, &inst.set, &[40.0, 20.0], 1e-10).unwrap();
        assert!(r < -1.0, "{r}");
    }

    #[test]
    fn residual_requires_feasible_point() {
        let inst = build_cournot(&CournotParams::<f64>::standard(2)).unwrap();
        assert!(primal_residual(&inst.bifunction, &inst.set, &[0.0, 0.0], 1e-10).is_err());
    }

    #[test]
    fn residual_op_with_coupled_q() {
        let q = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let p = OpParams {
            q,
            box_lo: Vector::zeros(2),
            box_hi: Vector::filled(2, 2.0),
        };
        let inst = build_op(&p).unwrap();
        // minimiser of φ on the symmetric ray: 3s − 1/(1+s) = 0
        let s = (-3.0 + (9.0f64 + 12.0).sqrt()) / 6.0;
        let r = primal_residual(&inst.bifunction, &inst.set, &[s, s], 1e-10).unwrap();
        assert!(r >= -1e-8, "{r}");
        let r = primal_residual(&inst.bifunction, &inst.set, &[1.0, 1.0], 1e-10).unwrap();
        assert!(r < -0.1, "{r}");
    }

    #[test]
    fn fejer_single_record() {
        let rec = IterationRecord {
            k: 0,
            beta: 1.0,
            eta: 1.0,
            lambda: 1.0,
            delta_z: None,
            restarted: false,
            x: Vector::from_f64s(&[1.0, 0.0]).unwrap(),
            y: Vector::from_f64s(&[1.0, 1.0]).unwrap(),
            x_next: Vector::from_f64s(&[1.0, 1.0]).unwrap(),
            z: Vector::from_f64s(&[1.0, 0.0]).unwrap(),
            bisection_iterations: 0,
            generic_residual: None,
        };
        assert_eq!(
            fejer_monitor(std::slice::from_ref(&rec), &[0.0, 0.0]),
            2.0 - 1.0 - 2.0
        );
        assert_eq!(decay_monitor(&[rec], &[0.0, 0.0], 0.5), 2.0 - 0.0 - 2.0);
    }

    #[test]
    fn brute_force_limits() {
        let inst = build_cournot(&CournotParams::<f64>::standard(4)).unwrap();
        assert!(brute_force_equilibrium(&inst.bifunction, &inst.set, 1.0).is_err());
        let rot = build_rotation::<f64>();
        assert!(brute_force_equilibrium(&rot.bifunction, &rot.set, 1.0).is_err());
    }
}
