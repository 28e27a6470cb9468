//! Exact and iterative solvers for the strongly convex subproblems
//!
//! ```text
//!     argmin { λ f(x, y) + ½‖y − a‖²  :  y ∈ S }
//! ```
//!
//! Every summand shape shipped by [`Component`] has an exact solver except the
//! general quadratic and user-supplied smooth summands, which go through a
//! fixed-step projected gradient loop.
//!
//! Box-with-sum regions couple the coordinates only through one scalar
//! multiplier `ν` on the sum constraint. For a fixed `ν` the problem separates,
//! each coordinate map `ν ↦ y_i(ν)` is nonincreasing, and the multiplier is
//! found by bisection on the coordinate sum.

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dist, Vector};
use crate::model::{Component, FeasibleSet};
use crate::scalar::Scalar;

/// Absolute tolerance on the coordinate sum when the sum constraint is active.
pub const SUM_TOL: f64 = 1e-10;
/// Relative width at which multiplier bisection stops.
pub const MULTIPLIER_TOL: f64 = 1e-12;
/// Fixed-point residual target of [`prox_generic`].
pub const GENERIC_TOL: f64 = 1e-10;
pub const GENERIC_MAX_ITER: usize = 100_000;

const MAX_BISECTIONS: usize = 400;
const MAX_BRACKET_EXPANSIONS: usize = 200;

/// One subproblem: weight `lambda`, proximity anchor, and constraint region.
#[derive(Clone, Copy, Debug)]
pub struct ProxRequest<'a, T> {
    pub lambda: T,
    pub anchor: &'a [T],
    pub set: &'a FeasibleSet<T>,
}

impl<'a, T: Scalar> ProxRequest<'a, T> {
    pub fn new(lambda: T, anchor: &'a [T], set: &'a FeasibleSet<T>) -> Result<Self> {
        if !lambda.is_finite() || lambda < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "prox weight must be finite and nonnegative, got {lambda}"
            )));
        }
        check_dim(set.dim(), anchor.len())?;
        if !anchor.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("prox anchor"));
        }
        Ok(Self {
            lambda,
            anchor,
            set,
        })
    }
}

/// Solver bookkeeping reported alongside a subproblem solution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProxDiagnostics<T> {
    pub bisection_iterations: usize,
    pub generic_iterations: usize,
    pub generic_residual: Option<T>,
}

impl<T: Scalar> ProxDiagnostics<T> {
    fn bisections(n: usize) -> Self {
        Self {
            bisection_iterations: n,
            generic_iterations: 0,
            generic_residual: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxOutcome<T> {
    pub point: Vector<T>,
    pub diagnostics: ProxDiagnostics<T>,
}

/// Componentwise clamp onto `[lo, hi]`.
pub fn project_box<T: Scalar>(p: &[T], lo: &[T], hi: &[T]) -> Vector<T> {
    p.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| v.max(l).min(h))
        .collect()
}

/// Minimiser of the box-with-sum separable QP plus the multiplier that
/// certifies it.
#[derive(Clone, Debug, PartialEq)]
pub struct SumBoxSolution<T> {
    pub point: Vector<T>,
    /// Multiplier of the sum constraint; zero when it is inactive.
    pub multiplier: T,
    pub iterations: usize,
}

/// Solves `min Σ ½ d_i (y_i − t_i)²` over `lo ≤ y ≤ hi`, `sum_lo ≤ Σy ≤ sum_hi`.
pub fn separable_qp_sum_box<T: Scalar>(
    d: &[T],
    t: &[T],
    lo: &[T],
    hi: &[T],
    sum_lo: T,
    sum_hi: T,
    tol: T,
) -> Result<Vector<T>> {
    separable_qp_sum_box_detailed(d, t, lo, hi, sum_lo, sum_hi, tol).map(|s| s.point)
}

pub fn separable_qp_sum_box_detailed<T: Scalar>(
    d: &[T],
    t: &[T],
    lo: &[T],
    hi: &[T],
    sum_lo: T,
    sum_hi: T,
    tol: T,
) -> Result<SumBoxSolution<T>> {
    let n = t.len();
    check_dim(n, d.len())?;
    check_dim(n, lo.len())?;
    check_dim(n, hi.len())?;
    if d.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidParameter(
            "quadratic weights must be positive".into(),
        ));
    }
    if !t.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("separable QP target"));
    }
    check_sum_box(lo, hi, sum_lo, sum_hi)?;

    let y_at = |i: usize, nu: T| (t[i] - nu / d[i]).max(lo[i]).min(hi[i]);
    let bracket = (0..n).fold((T::infinity(), T::neg_infinity()), |(a, b), i| {
        (a.min(d[i] * (t[i] - hi[i])), b.max(d[i] * (t[i] - lo[i])))
    });
    // On a fixed free set the sum is affine in ν, so one linear solve lands on
    // the root once bisection has identified the right piece.
    let polish = |nu: T, target: T| -> Option<T> {
        let mut fixed = T::zero();
        let mut free_t = T::zero();
        let mut free_w = T::zero();
        for i in 0..n {
            let raw = t[i] - nu / d[i];
            if raw > lo[i] && raw < hi[i] {
                free_t = free_t + t[i];
                free_w = free_w + T::one() / d[i];
            } else {
                fixed = fixed + raw.max(lo[i]).min(hi[i]);
            }
        }
        (free_w > T::zero()).then(|| (free_t + fixed - target) / free_w)
    };
    coupled_sum_search(n, y_at, bracket, sum_lo, sum_hi, tol, Some(&polish))
}

fn check_sum_box<T: Scalar>(lo: &[T], hi: &[T], sum_lo: T, sum_hi: T) -> Result<()> {
    if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i])) {
        return Err(Error::InvalidSet(format!(
            "empty interval at coordinate {i}"
        )));
    }
    let lo_total: T = lo.iter().copied().sum();
    let hi_total: T = hi.iter().copied().sum();
    if sum_lo > sum_hi || lo_total > sum_hi || hi_total < sum_lo {
        return Err(Error::Infeasible(format!(
            "box sums span [{lo_total}, {hi_total}], sum bound is [{sum_lo}, {sum_hi}]"
        )));
    }
    Ok(())
}

type Polish<'a, T> = &'a dyn Fn(T, T) -> Option<T>;

/// Finds `ν` with `Σ y_i(ν)` inside `[sum_lo, sum_hi]`, where each `y_i` is
/// nonincreasing in `ν`. `ν = 0` is returned whenever it already works.
fn coupled_sum_search<T: Scalar>(
    n: usize,
    y_at: impl Fn(usize, T) -> T,
    bracket: (T, T),
    sum_lo: T,
    sum_hi: T,
    tol: T,
    polish: Option<Polish<'_, T>>,
) -> Result<SumBoxSolution<T>> {
    let point_at = |nu: T| -> Vector<T> { (0..n).map(|i| y_at(i, nu)).collect() };
    let sum_at = |nu: T| -> T { (0..n).map(|i| y_at(i, nu)).sum() };

    let s0 = sum_at(T::zero());
    if s0 >= sum_lo && s0 <= sum_hi {
        return Ok(SumBoxSolution {
            point: point_at(T::zero()),
            multiplier: T::zero(),
            iterations: 0,
        });
    }
    let target = if s0 > sum_hi { sum_hi } else { sum_lo };

    // Root lies on the side of zero where the sum moves toward the target.
    let (mut a, mut b) = if s0 > target {
        (T::zero(), bracket.1.max(T::zero()))
    } else {
        (bracket.0.min(T::zero()), T::zero())
    };
    let two = T::lit(2.0);
    let mut expansions = 0;
    while sum_at(a) < target || sum_at(b) > target {
        if expansions == MAX_BRACKET_EXPANSIONS || !a.is_finite() || !b.is_finite() {
            return Err(Error::Internal(format!(
                "could not bracket the sum multiplier for target {target}"
            )));
        }
        let width = (b - a).max(T::one());
        if sum_at(a) < target {
            a = a - width * two;
        }
        if sum_at(b) > target {
            b = b + width * two;
        }
        expansions += 1;
    }

    let nu_tol = T::lit(MULTIPLIER_TOL);
    let mut best = if (sum_at(a) - target).abs() <= (sum_at(b) - target).abs() {
        a
    } else {
        b
    };
    let mut best_res = (sum_at(best) - target).abs();
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS && best_res > tol {
        let mid = (a + b) / two;
        if mid <= a || mid >= b {
            break;
        }
        iterations += 1;
        let s = sum_at(mid);
        let res = (s - target).abs();
        if res < best_res {
            best = mid;
            best_res = res;
        }
        if s > target {
            a = mid;
        } else {
            b = mid;
        }
        if let Some(p) = polish {
            if let Some(nu) = p(mid, target) {
                if nu >= a && nu <= b {
                    let r = (sum_at(nu) - target).abs();
                    if r < best_res {
                        best = nu;
                        best_res = r;
                    }
                }
            }
        }
        if b - a <= nu_tol * T::one().max(mid.abs()) {
            break;
        }
    }
    Ok(SumBoxSolution {
        point: point_at(best),
        multiplier: best,
        iterations,
    })
}

/// Minimiser of `Σ ½ d_i (y_i − t_i)²` over `set`.
pub(crate) fn weighted_projection<T: Scalar>(
    d: &[T],
    t: &[T],
    set: &FeasibleSet<T>,
) -> Result<(Vector<T>, usize)> {
    match set {
        FeasibleSet::WholeSpace { .. } => Ok((t.iter().copied().collect(), 0)),
        FeasibleSet::Box { lo, hi } => Ok((project_box(t, lo, hi), 0)),
        FeasibleSet::BoxSum {
            lo,
            hi,
            sum_lo,
            sum_hi,
        } => {
            let s = separable_qp_sum_box_detailed(d, t, lo, hi, *sum_lo, *sum_hi, T::lit(SUM_TOL))?;
            Ok((s.point, s.iterations))
        }
    }
}

/// `argmin λ cᵀy + ½‖y − a‖²` over the set, i.e. `P_S(a − λc)`.
pub fn prox_affine<T: Scalar>(c: &[T], req: &ProxRequest<'_, T>) -> Result<Vector<T>> {
    prox_affine_detailed(c, req).map(|o| o.point)
}

pub fn prox_affine_detailed<T: Scalar>(
    c: &[T],
    req: &ProxRequest<'_, T>,
) -> Result<ProxOutcome<T>> {
    check_dim(req.anchor.len(), c.len())?;
    let shifted: Vec<T> = req
        .anchor
        .iter()
        .zip(c)
        .map(|(&a, &ci)| a - req.lambda * ci)
        .collect();
    let ones = vec![T::one(); shifted.len()];
    let (point, iters) = weighted_projection(&ones, &shifted, req.set)?;
    Ok(ProxOutcome {
        point,
        diagnostics: ProxDiagnostics::bisections(iters),
    })
}

/// `argmin λ Σ δ_i y_i² + ½‖y − a‖²` over the set.
pub fn prox_diag_quad<T: Scalar>(delta: &[T], req: &ProxRequest<'_, T>) -> Result<Vector<T>> {
    prox_diag_quad_detailed(delta, req).map(|o| o.point)
}

pub fn prox_diag_quad_detailed<T: Scalar>(
    delta: &[T],
    req: &ProxRequest<'_, T>,
) -> Result<ProxOutcome<T>> {
    check_dim(req.anchor.len(), delta.len())?;
    let two = T::lit(2.0);
    let d: Vec<T> = delta
        .iter()
        .map(|&w| T::one() + two * req.lambda * w)
        .collect();
    if d.iter().any(|&w| !(w > T::zero())) {
        return Err(Error::InvalidParameter(
            "diagonal quadratic weights must keep the subproblem strongly convex".into(),
        ));
    }
    let t: Vec<T> = req.anchor.iter().zip(&d).map(|(&a, &w)| a / w).collect();
    let (point, iters) = weighted_projection(&d, &t, req.set)?;
    Ok(ProxOutcome {
        point,
        diagnostics: ProxDiagnostics::bisections(iters),
    })
}

fn log_objective<T: Scalar>(lambda: T, z: T, y: T) -> T {
    let half = T::lit(0.5);
    -lambda * (T::one() + y.max(T::zero())).ln() + half * (y - z) * (y - z)
}

/// Minimiser over `[lo, hi]` of `−λ ln(1 + max{0, y}) + ½(y − z)²`.
///
/// Infinite bounds are allowed. Candidates are the projection onto the
/// nonpositive branch, the positive-branch stationary point, and the finite
/// endpoints; ties go to the smaller `y`.
pub fn prox_log_1d<T: Scalar>(lambda: T, z: T, lo: T, hi: T) -> T {
    let zero = T::zero();
    let mut candidates: Vec<T> = Vec::with_capacity(4);
    if lo <= zero {
        candidates.push(z.max(lo).min(hi.min(zero)));
    }
    // root of y² + (1 − z) y − (z + λ) = 0, written to avoid cancellation
    let b = T::one() - z;
    let c = z + lambda;
    let disc = ((T::one() + z) * (T::one() + z) + T::lit(4.0) * lambda).sqrt();
    let stationary = if b > zero {
        T::lit(2.0) * c / (b + disc)
    } else {
        (disc - b) / T::lit(2.0)
    };
    if stationary >= lo.max(zero) && stationary <= hi {
        candidates.push(stationary);
    }
    for e in [lo, hi] {
        if e.is_finite() {
            candidates.push(e);
        }
    }
    let mut best = candidates[0];
    let mut best_val = log_objective(lambda, z, best);
    for &y in &candidates[1..] {
        let v = log_objective(lambda, z, y);
        if v < best_val || (v == best_val && y < best) {
            best = y;
            best_val = v;
        }
    }
    best
}

/// `argmin λ s Σ −ln(1 + max{0, y_i}) + ½‖y − a‖²` over the set.
pub fn prox_log<T: Scalar>(scale: T, req: &ProxRequest<'_, T>) -> Result<ProxOutcome<T>> {
    let w = req.lambda * scale;
    let a = req.anchor;
    let n = a.len();
    match req.set {
        FeasibleSet::WholeSpace { .. } => Ok(ProxOutcome {
            point: a
                .iter()
                .map(|&ai| prox_log_1d(w, ai, T::neg_infinity(), T::infinity()))
                .collect(),
            diagnostics: ProxDiagnostics::default(),
        }),
        FeasibleSet::Box { lo, hi } => Ok(ProxOutcome {
            point: (0..n).map(|i| prox_log_1d(w, a[i], lo[i], hi[i])).collect(),
            diagnostics: ProxDiagnostics::default(),
        }),
        FeasibleSet::BoxSum {
            lo,
            hi,
            sum_lo,
            sum_hi,
        } => {
            check_sum_box(lo, hi, *sum_lo, *sum_hi)?;
            let y_at = |i: usize, nu: T| prox_log_1d(w, a[i] - nu, lo[i], hi[i]);
            // clamp(z) ≤ prox(z) ≤ clamp(z + w)
            let bracket = (0..n).fold((T::infinity(), T::neg_infinity()), |(l, u), i| {
                (l.min(a[i] - hi[i]), u.max(a[i] - lo[i] + w))
            });
            let s = coupled_sum_search(n, y_at, bracket, *sum_lo, *sum_hi, T::lit(SUM_TOL), None)?;
            Ok(ProxOutcome {
                point: s.point,
                diagnostics: ProxDiagnostics::bisections(s.iterations),
            })
        }
    }
}

/// Fixed-step projected gradient for smooth summands without a closed form.
///
/// The subproblem objective is 1-strongly convex with gradient Lipschitz
/// constant `1 + λL`; the step `1/(1 + λL)` makes each iteration a
/// contraction. Stops once `‖y − P_S(y − ∇obj(y))‖ ≤ tol`.
pub fn prox_generic<T: Scalar>(
    component: &Component<T>,
    x: &[T],
    req: &ProxRequest<'_, T>,
    tol: T,
    max_iter: usize,
) -> Result<ProxOutcome<T>> {
    let smoothness = component
        .smoothness()
        .ok_or_else(|| Error::Unsupported("generic prox needs a smooth summand".into()))?;
    let lambda = req.lambda;
    let grad = |y: &[T]| -> Result<Vector<T>> {
        let g = component
            .smooth_gradient(x, y)
            .expect("smoothness implies a gradient");
        check_dim(y.len(), g.len())?;
        Ok(g.iter()
            .zip(y.iter().zip(req.anchor))
            .map(|(&gi, (&yi, &ai))| lambda * gi + yi - ai)
            .collect())
    };
    let step = T::one() / (T::one() + lambda * smoothness);
    let mut y = req.set.project(req.anchor)?;
    let mut residual = T::infinity();
    for it in 0..=max_iter {
        let g = grad(&y)?;
        let unit: Vec<T> = y.iter().zip(g.iter()).map(|(&a, &b)| a - b).collect();
        residual = dist(&y, &req.set.project(&unit)?);
        if !residual.is_finite() {
            return Err(Error::NonFinite("generic prox iterate"));
        }
        if residual <= tol {
            return Ok(ProxOutcome {
                point: y,
                diagnostics: ProxDiagnostics {
                    bisection_iterations: 0,
                    generic_iterations: it,
                    generic_residual: Some(residual),
                },
            });
        }
        if it == max_iter {
            break;
        }
        let trial: Vec<T> = y
            .iter()
            .zip(g.iter())
            .map(|(&a, &b)| a - step * b)
            .collect();
        y = req.set.project(&trial)?;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: residual.to_f64_lossy(),
    })
}

/// Solves the subproblem for `f(x, ·) = component` with the best solver for
/// its shape.
pub fn prox_component<T: Scalar>(
    component: &Component<T>,
    x: &[T],
    req: &ProxRequest<'_, T>,
) -> Result<ProxOutcome<T>> {
    match component {
        Component::Zero => {
            let ones = vec![T::one(); req.anchor.len()];
            let (point, iters) = weighted_projection(&ones, req.anchor, req.set)?;
            Ok(ProxOutcome {
                point,
                diagnostics: ProxDiagnostics::bisections(iters),
            })
        }
        Component::Affine { .. } => prox_affine_detailed(&component.affine_coefficient(x), req),
        Component::DiagonalQuadratic { delta } => prox_diag_quad_detailed(delta, req),
        Component::GeneralQuadratic { q } => match q.as_diagonal() {
            Some(diag) => {
                let half = T::lit(0.5);
                let delta: Vec<T> = diag.into_iter().map(|v| v * half).collect();
                prox_diag_quad_detailed(&delta, req)
            }
            None => prox_generic(component, x, req, T::lit(GENERIC_TOL), GENERIC_MAX_ITER),
        },
        Component::SeparableLogBarrier { scale } => prox_log(*scale, req),
        Component::Smooth(_) => {
            prox_generic(component, x, req, T::lit(GENERIC_TOL), GENERIC_MAX_ITER)
        }
    }
}
