//! Bifunctions, their two-part splitting, and the constraint regions they
//! live on.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, sub, Matrix, Vector};
use crate::prox;
use crate::scalar::Scalar;

/// Default additive slack for membership tests.
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Closed convex region the equilibrium is sought on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum FeasibleSet<T> {
    WholeSpace {
        dim: usize,
    },
    Box {
        lo: Vector<T>,
        hi: Vector<T>,
    },
    /// A box intersected with a two-sided bound on the coordinate sum.
    BoxSum {
        lo: Vector<T>,
        hi: Vector<T>,
        sum_lo: T,
        sum_hi: T,
    },
}

impl<T: Scalar> FeasibleSet<T> {
    pub fn whole_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSet("dimension must be at least 1".into()));
        }
        Ok(Self::WholeSpace { dim })
    }

    pub fn boxed(lo: Vector<T>, hi: Vector<T>) -> Result<Self> {
        validate_box(&lo, &hi)?;
        Ok(Self::Box { lo, hi })
    }

    pub fn box_sum(lo: Vector<T>, hi: Vector<T>, sum_lo: T, sum_hi: T) -> Result<Self> {
        validate_box(&lo, &hi)?;
        if !sum_lo.is_finite() || !sum_hi.is_finite() {
            return Err(Error::NonFinite("sum bounds"));
        }
        if sum_lo > sum_hi {
            return Err(Error::InvalidSet(format!(
                "sum interval [{sum_lo}, {sum_hi}] is empty"
            )));
        }
        let lo_total: T = lo.iter().copied().sum();
        let hi_total: T = hi.iter().copied().sum();
        if lo_total > sum_hi || hi_total < sum_lo {
            return Err(Error::Infeasible(format!(
                "box sums span [{lo_total}, {hi_total}], disjoint from [{sum_lo}, {sum_hi}]"
            )));
        }
        Ok(Self::BoxSum {
            lo,
            hi,
            sum_lo,
            sum_hi,
        })
    }

    /// Re-checks the invariants, e.g. after deserialising.
    pub fn validated(self) -> Result<Self> {
        match self {
            Self::WholeSpace { dim } => Self::whole_space(dim),
            Self::Box { lo, hi } => Self::boxed(lo, hi),
            Self::BoxSum {
                lo,
                hi,
                sum_lo,
                sum_hi,
            } => Self::box_sum(lo, hi, sum_lo, sum_hi),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::WholeSpace { dim } => *dim,
            Self::Box { lo, .. } | Self::BoxSum { lo, .. } => lo.dim(),
        }
    }

    /// Per-coordinate bounds; infinite for the whole space.
    pub fn bounds(&self) -> (Vector<T>, Vector<T>) {
        match self {
            Self::WholeSpace { dim } => (
                Vector::filled(*dim, T::neg_infinity()),
                Vector::filled(*dim, T::infinity()),
            ),
            Self::Box { lo, hi } | Self::BoxSum { lo, hi, .. } => (lo.clone(), hi.clone()),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Self::WholeSpace { .. })
    }

    /// Whether `x` satisfies every constraint up to additive slack `tol`.
    /// Dimension mismatches and non-finite points are never contained.
    pub fn contains(&self, x: &[T], tol: T) -> bool {
        if x.len() != self.dim() || !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        let in_box = |lo: &[T], hi: &[T]| {
            x.iter()
                .zip(lo.iter().zip(hi))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol)
        };
        match self {
            Self::WholeSpace { .. } => true,
            Self::Box { lo, hi } => in_box(lo, hi),
            Self::BoxSum {
                lo,
                hi,
                sum_lo,
                sum_hi,
            } => {
                let s: T = x.iter().copied().sum();
                in_box(lo, hi) && s >= *sum_lo - tol && s <= *sum_hi + tol
            }
        }
    }

    /// Euclidean projection.
    pub fn project(&self, p: &[T]) -> Result<Vector<T>> {
        check_dim(self.dim(), p.len())?;
        match self {
            Self::WholeSpace { .. } => Ok(p.iter().copied().collect()),
            Self::Box { lo, hi } => Ok(prox::project_box(p, lo, hi)),
            Self::BoxSum {
                lo,
                hi,
                sum_lo,
                sum_hi,
            } => {
                let ones = vec![T::one(); p.len()];
                prox::separable_qp_sum_box(
                    &ones,
                    p,
                    lo,
                    hi,
                    *sum_lo,
                    *sum_hi,
                    T::lit(prox::SUM_TOL),
                )
            }
        }
    }
}

fn validate_box<T: Scalar>(lo: &Vector<T>, hi: &Vector<T>) -> Result<()> {
    check_dim(lo.dim(), hi.dim())?;
    if lo.dim() == 0 {
        return Err(Error::InvalidSet("dimension must be at least 1".into()));
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite("box bounds"));
    }
    if let Some(i) = (0..lo.dim()).find(|&i| lo[i] > hi[i]) {
        return Err(Error::InvalidSet(format!(
            "lower bound {} exceeds upper bound {} at coordinate {i}",
            lo[i], hi[i]
        )));
    }
    Ok(())
}

/// `contains` with the argument order of the free-function API.
pub fn contains_point<T: Scalar>(set: &FeasibleSet<T>, x: &[T], tol: T) -> bool {
    set.contains(x, tol)
}

/// User-supplied smooth summand `f_i(x, ·)` with gradient access.
///
/// Implementors must have `eval(x, x) == 0` and `eval(x, ·)` convex with an
/// `L`-Lipschitz gradient, `L = smoothness()`.
pub trait SmoothBifunction<T>: Send + Sync {
    fn eval(&self, x: &[T], y: &[T]) -> T;

    /// Gradient of `eval(x, ·)` at `y`.
    fn grad_y(&self, x: &[T], y: &[T]) -> Vector<T>;

    fn smoothness(&self) -> T;

    fn name(&self) -> &str {
        "smooth"
    }
}

/// Which subproblem solver applies to a summand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxKind {
    Zero,
    Affine,
    DiagonalQuadratic,
    GeneralQuadratic,
    SeparableLogBarrier,
    GenericSmooth,
}

/// One summand of a split bifunction. Each variant vanishes on the diagonal.
#[derive(Clone)]
pub enum Component<T> {
    /// `f(x, y) = 0`.
    Zero,
    /// `f(x, y) = (M x + b)ᵀ (y − x)`.
    Affine {
        matrix: Matrix<T>,
        offset: Vector<T>,
    },
    /// `f(x, y) = Σ δ_i (y_i² − x_i²)`, i.e. `½yᵀBy − ½xᵀBx` with `B = diag(2δ)`.
    DiagonalQuadratic {
        delta: Vector<T>,
    },
    /// `f(x, y) = ½ yᵀQy − ½ xᵀQx` for symmetric psd `Q`.
    GeneralQuadratic {
        q: Matrix<T>,
    },
    /// `f(x, y) = s · Σ [ln(1 + max{0, x_i}) − ln(1 + max{0, y_i})]`.
    SeparableLogBarrier {
        scale: T,
    },
    Smooth(Arc<dyn SmoothBifunction<T>>),
}

impl<T: fmt::Debug> fmt::Debug for Component<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Affine { matrix, offset } => f
                .debug_struct("Affine")
                .field("matrix", matrix)
                .field("offset", offset)
                .finish(),
            Self::DiagonalQuadratic { delta } => f
                .debug_struct("DiagonalQuadratic")
                .field("delta", delta)
                .finish(),
            Self::GeneralQuadratic { q } => {
                f.debug_struct("GeneralQuadratic").field("q", q).finish()
            }
            Self::SeparableLogBarrier { scale } => f
                .debug_struct("SeparableLogBarrier")
                .field("scale", scale)
                .finish(),
            Self::Smooth(s) => write!(f, "Smooth({})", s.name()),
        }
    }
}

fn log_pos<T: Scalar>(v: T) -> T {
    (T::one() + v.max(T::zero())).ln()
}

impl<T: Scalar> Component<T> {
    pub fn kind(&self) -> ProxKind {
        match self {
            Self::Zero => ProxKind::Zero,
            Self::Affine { .. } => ProxKind::Affine,
            Self::DiagonalQuadratic { .. } => ProxKind::DiagonalQuadratic,
            Self::GeneralQuadratic { .. } => ProxKind::GeneralQuadratic,
            Self::SeparableLogBarrier { .. } => ProxKind::SeparableLogBarrier,
            Self::Smooth(_) => ProxKind::GenericSmooth,
        }
    }

    /// Dimension the summand is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Affine { offset, .. } => Some(offset.dim()),
            Self::DiagonalQuadratic { delta } => Some(delta.dim()),
            Self::GeneralQuadratic { q } => Some(q.rows()),
            Self::Zero | Self::SeparableLogBarrier { .. } | Self::Smooth(_) => None,
        }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::Affine { .. } => dot(&self.affine_coefficient(x), &sub(y, x)),
            Self::DiagonalQuadratic { delta } => delta
                .iter()
                .zip(x.iter().zip(y))
                .map(|(&d, (&xi, &yi))| d * (yi - xi) * (yi + xi))
                .sum(),
            Self::GeneralQuadratic { q } => {
                let half = T::lit(0.5);
                half * q.quad_form(y) - half * q.quad_form(x)
            }
            Self::SeparableLogBarrier { scale } => {
                *scale
                    * x.iter()
                        .zip(y)
                        .map(|(&xi, &yi)| log_pos(xi) - log_pos(yi))
                        .sum::<T>()
            }
            Self::Smooth(s) => s.eval(x, y),
        }
    }

    /// `M x + b` for the affine variant; zero vector otherwise.
    pub fn affine_coefficient(&self, x: &[T]) -> Vector<T> {
        match self {
            Self::Affine { matrix, offset } => matrix
                .mul_vec(x)
                .iter()
                .zip(offset.iter())
                .map(|(&a, &b)| a + b)
                .collect(),
            _ => Vector::zeros(x.len()),
        }
    }

    /// A selection from `∂₂f(x, x)`. At the kink of the log term the
    /// smallest-norm element, zero, is returned.
    pub fn diag_subgradient(&self, x: &[T]) -> Vector<T> {
        match self {
            Self::SeparableLogBarrier { scale } => x
                .iter()
                .map(|&xi| {
                    if xi > T::zero() {
                        -*scale / (T::one() + xi)
                    } else {
                        T::zero()
                    }
                })
                .collect(),
            _ => self
                .smooth_gradient(x, x)
                .expect("every non-log summand is smooth"),
        }
    }

    /// Gradient of `f(x, ·)` at `y`, or `None` for the nonsmooth log term.
    pub fn smooth_gradient(&self, x: &[T], y: &[T]) -> Option<Vector<T>> {
        let two = T::lit(2.0);
        match self {
            Self::Zero => Some(Vector::zeros(y.len())),
            Self::Affine { .. } => Some(self.affine_coefficient(x)),
            Self::DiagonalQuadratic { delta } => {
                Some(delta.iter().zip(y).map(|(&d, &v)| two * d * v).collect())
            }
            Self::GeneralQuadratic { q } => Some(q.mul_vec(y)),
            Self::SeparableLogBarrier { .. } => None,
            Self::Smooth(s) => Some(s.grad_y(x, y)),
        }
    }

    /// Lipschitz constant of `∇_y f(x, ·)`, or `None` when nonsmooth.
    pub fn smoothness(&self) -> Option<T> {
        match self {
            Self::Zero | Self::Affine { .. } => Some(T::zero()),
            Self::DiagonalQuadratic { delta } => Some(
                delta
                    .iter()
                    .fold(T::zero(), |m, &d| m.max(T::lit(2.0) * d.abs())),
            ),
            Self::GeneralQuadratic { q } => Some(q.max_abs_row_sum()),
            Self::SeparableLogBarrier { .. } => None,
            Self::Smooth(s) => Some(s.smoothness()),
        }
    }
}

/// `f = f₁ + f₂` on `R^n`.
#[derive(Clone, Debug)]
pub struct SplitBifunction<T> {
    dim: usize,
    first: Component<T>,
    second: Component<T>,
}

impl<T: Scalar> SplitBifunction<T> {
    pub fn new(dim: usize, first: Component<T>, second: Component<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "dimension must be at least 1".into(),
            ));
        }
        for c in [&first, &second] {
            if let Some(d) = c.dim() {
                check_dim(dim, d)?;
            }
            match c {
                Component::Affine { matrix, .. } => {
                    check_dim(dim, matrix.rows())?;
                    check_dim(dim, matrix.cols())?;
                }
                Component::GeneralQuadratic { q } => check_dim(dim, q.cols())?,
                Component::DiagonalQuadratic { delta } => {
                    if delta.iter().any(|&d| d < T::zero()) {
                        return Err(Error::InvalidParameter(
                            "diagonal quadratic weights must be nonnegative".into(),
                        ));
                    }
                }
                Component::SeparableLogBarrier { scale }
                    if !(*scale >= T::zero()) || !scale.is_finite() =>
                {
                    return Err(Error::InvalidParameter(
                        "log-barrier scale must be finite and nonnegative".into(),
                    ));
                }
                _ => {}
            }
        }
        Ok(Self { dim, first, second })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn first(&self) -> &Component<T> {
        &self.first
    }

    pub fn second(&self) -> &Component<T> {
        &self.second
    }

    pub fn components(&self) -> [&Component<T>; 2] {
        [&self.first, &self.second]
    }

    pub fn eval1(&self, x: &[T], y: &[T]) -> T {
        self.first.eval(x, y)
    }

    pub fn eval2(&self, x: &[T], y: &[T]) -> T {
        self.second.eval(x, y)
    }

    pub fn diag_subgrad1(&self, x: &[T]) -> Vector<T> {
        self.first.diag_subgradient(x)
    }

    pub fn diag_subgrad2(&self, x: &[T]) -> Vector<T> {
        self.second.diag_subgradient(x)
    }

    /// `f₁(x, y) + f₂(x, y)`.
    pub fn eval_sum(&self, x: &[T], y: &[T]) -> Result<T> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, y.len())?;
        Ok(self.eval1(x, y) + self.eval2(x, y))
    }
}
