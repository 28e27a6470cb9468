//! Built-in problem instances and the JSON parameter-file format.
//!
//! | kind       | f₁                         | f₂                                | region         |
//! |------------|----------------------------|-----------------------------------|----------------|
//! | `cournot`  | `(B̃x + μ − α)ᵀ(y − x)`     | `½yᵀBy − ½xᵀBx`, `B = diag(2δ)`   | box + quota    |
//! | `op`       | `½yᵀQy − ½xᵀQx`            | `Σ ln(1+x_i⁺) − ln(1+y_i⁺)`       | box            |
//! | `rotation` | `⟨Ax, y − x⟩`, `A` = 90° rotation | 0                          | `R²`           |
//! | `spm`      | `⟨βx, y − x⟩`              | 0                                 | box around 0   |

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, Matrix, Vector};
use crate::model::{Component, FeasibleSet, SplitBifunction};
use crate::prox::prox_log_1d;
use crate::scalar::Scalar;

/// A bifunction, its region, a starting point and what is known about it.
#[derive(Clone, Debug)]
pub struct ProblemInstance<T> {
    pub name: String,
    pub bifunction: SplitBifunction<T>,
    pub set: FeasibleSet<T>,
    pub x0: Vector<T>,
    /// A solution, when one is available in closed form.
    pub known_solution: Option<Vector<T>>,
    /// `f(x, y) + f(y, x) ≤ 0` on the region.
    pub monotone: bool,
    pub paramonotone: bool,
    /// Modulus of strong pseudomonotonicity, when the instance has one.
    pub strong_modulus: Option<T>,
}

impl<T: Scalar> ProblemInstance<T> {
    pub fn dim(&self) -> usize {
        self.bifunction.dim()
    }
}

/// Linear inverse-demand Cournot oligopoly with a joint production quota.
///
/// Firm `i` sells at `α_i − δ_i σ` where `σ` is total output, and pays
/// `μ_i x_i + ξ_i`. The fixed cost `ξ_i` drops out of every profit
/// difference, so it is carried for completeness and never enters `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct CournotParams<T> {
    pub n: usize,
    pub alpha: Vector<T>,
    pub delta: Vector<T>,
    pub mu: Vector<T>,
    pub xi: Vector<T>,
    pub box_lo: Vector<T>,
    pub box_hi: Vector<T>,
    pub sigma_lo: T,
    pub sigma_hi: T,
}

impl<T: Scalar> CournotParams<T> {
    /// `α_i = 120`, `δ_i = 1`, `μ_i = 30`, `ξ_i = 0`, `x_i ∈ [10, 50]`,
    /// `10n + 10 ≤ Σx_i ≤ 50n − 10`.
    pub fn standard(n: usize) -> Self {
        let c = |v: f64| Vector::filled(n, T::lit(v));
        let nf = n as f64;
        Self {
            n,
            alpha: c(120.0),
            delta: c(1.0),
            mu: c(30.0),
            xi: c(0.0),
            box_lo: c(10.0),
            box_hi: c(50.0),
            sigma_lo: T::lit(10.0 * nf + 10.0),
            sigma_hi: T::lit(50.0 * nf - 10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(
                "Cournot model needs at least two firms".into(),
            ));
        }
        for (name, v) in [
            ("alpha", &self.alpha),
            ("delta", &self.delta),
            ("mu", &self.mu),
            ("xi", &self.xi),
            ("box_lo", &self.box_lo),
            ("box_hi", &self.box_hi),
        ] {
            check_dim(self.n, v.dim())?;
            if !v.is_finite() {
                return Err(Error::NonFinite("Cournot parameters"));
            }
            let ok = match name {
                "xi" => v.iter().all(|&x| x >= T::zero()),
                "box_lo" | "box_hi" => true,
                _ => v.iter().all(|&x| x > T::zero()),
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "{name} has a nonpositive entry"
                )));
            }
        }
        self.feasible_set().map(|_| ())
    }

    /// `B̃`: zero diagonal, row `i` filled with `δ_i`.
    pub fn tilde_b(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    m.set(i, j, self.delta[i]);
                }
            }
        }
        m
    }

    /// `B = diag(2δ)`.
    pub fn b(&self) -> Matrix<T> {
        let two = T::lit(2.0);
        Matrix::diagonal(&self.delta.iter().map(|&d| two * d).collect::<Vec<_>>())
    }

    pub fn feasible_set(&self) -> Result<FeasibleSet<T>> {
        FeasibleSet::box_sum(
            self.box_lo.clone(),
            self.box_hi.clone(),
            self.sigma_lo,
            self.sigma_hi,
        )
    }

    fn is_symmetric(&self) -> bool {
        let same = |v: &Vector<T>| v.iter().all(|&x| x == v[0]);
        same(&self.alpha)
            && same(&self.delta)
            && same(&self.mu)
            && same(&self.box_lo)
            && same(&self.box_hi)
    }

    /// Equilibrium for identical firms.
    ///
    /// The operator `(B̃ + B)x + μ − α` is constant across coordinates on the
    /// ray `s·1`, so the solution is the unconstrained symmetric point
    /// `(α − μ)/(δ(n + 1))` clamped into the range of `s` allowed by the box
    /// and the quota. Returns `None` for heterogeneous firms.
    pub fn symmetric_solution(&self) -> Option<Vector<T>> {
        if !self.is_symmetric() {
            return None;
        }
        let nf = T::from_usize_lossy(self.n);
        let free = (self.alpha[0] - self.mu[0]) / (self.delta[0] * (nf + T::one()));
        let lower = self.box_lo[0].max(self.sigma_lo / nf);
        let upper = self.box_hi[0].min(self.sigma_hi / nf);
        Some(Vector::filled(self.n, free.max(lower).min(upper)))
    }
}

pub fn build_cournot<T: Scalar>(p: &CournotParams<T>) -> Result<ProblemInstance<T>> {
    p.validate()?;
    let offset: Vector<T> =
        p.mu.iter()
            .zip(p.alpha.iter())
            .map(|(&m, &a)| m - a)
            .collect();
    let bifunction = SplitBifunction::new(
        p.n,
        Component::Affine {
            matrix: p.tilde_b(),
            offset,
        },
        Component::DiagonalQuadratic {
            delta: p.delta.clone(),
        },
    )?;
    Ok(ProblemInstance {
        name: format!("cournot-{}", p.n),
        bifunction,
        set: p.feasible_set()?,
        x0: Vector::filled(p.n, T::lit(30.0)),
        known_solution: p.symmetric_solution(),
        // f(x,y) + f(y,x) = −(x−y)ᵀB̃(x−y), and B̃ is indefinite.
        monotone: false,
        paramonotone: false,
        strong_modulus: None,
    })
}

/// `min ½xᵀQx − Σ ln(1 + max{0, x_i})` over a box, as an equilibrium problem.
#[derive(Clone, Debug, PartialEq)]
pub struct OpParams<T> {
    pub q: Matrix<T>,
    pub box_lo: Vector<T>,
    pub box_hi: Vector<T>,
}

impl<T: Scalar> OpParams<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.box_lo.dim();
        check_dim(n, self.q.rows())?;
        check_dim(n, self.q.cols())?;
        if !self.q.is_symmetric(T::lit(1e-12)) {
            return Err(Error::InvalidParameter("Q must be symmetric".into()));
        }
        if !self.q.is_positive_definite_shifted(T::lit(1e-8)) {
            return Err(Error::InvalidParameter(
                "Q must be positive semidefinite".into(),
            ));
        }
        FeasibleSet::boxed(self.box_lo.clone(), self.box_hi.clone()).map(|_| ())
    }

    /// `φ(x)`.
    pub fn objective(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        half * self.q.quad_form(x)
            - x.iter()
                .map(|&v| (T::one() + v.max(T::zero())).ln())
                .sum::<T>()
    }

    /// Minimiser of `φ` when `Q` is diagonal (the problem then separates).
    pub fn diagonal_solution(&self) -> Option<Vector<T>> {
        let diag = self.q.as_diagonal()?;
        Some(
            diag.iter()
                .enumerate()
                .map(|(i, &qi)| {
                    let (lo, hi) = (self.box_lo[i], self.box_hi[i]);
                    if qi > T::zero() {
                        // ½q y² − ln(1+y⁺) = q·(½(y − 0)² − (1/q) ln(1+y⁺))
                        prox_log_1d(T::one() / qi, T::zero(), lo, hi)
                    } else if hi > T::zero() {
                        hi
                    } else {
                        lo
                    }
                })
                .collect(),
        )
    }
}

pub fn build_op<T: Scalar>(p: &OpParams<T>) -> Result<ProblemInstance<T>> {
    p.validate()?;
    let n = p.box_lo.dim();
    let first = match p.q.as_diagonal() {
        Some(d) => Component::DiagonalQuadratic {
            delta: d.into_iter().map(|v| v * T::lit(0.5)).collect(),
        },
        None => Component::GeneralQuadratic { q: p.q.clone() },
    };
    let bifunction =
        SplitBifunction::new(n, first, Component::SeparableLogBarrier { scale: T::one() })?;
    let half = T::lit(0.5);
    Ok(ProblemInstance {
        name: format!("op-{n}"),
        bifunction,
        set: FeasibleSet::boxed(p.box_lo.clone(), p.box_hi.clone())?,
        x0: p
            .box_lo
            .iter()
            .zip(p.box_hi.iter())
            .map(|(&l, &h)| half * (l + h))
            .collect(),
        known_solution: p.diagonal_solution(),
        monotone: true,
        paramonotone: true,
        strong_modulus: None,
    })
}

/// `f(x, y) = ⟨Ax, y − x⟩` on `R²` with `A = [[0, 1], [−1, 0]]`: monotone
/// (skew) but not paramonotone, with unique solution 0.
pub fn build_rotation<T: Scalar>() -> ProblemInstance<T> {
    let a = Matrix::from_rows(&[vec![T::zero(), T::one()], vec![-T::one(), T::zero()]])
        .expect("2x2 rotation");
    let bifunction = SplitBifunction::new(
        2,
        Component::Affine {
            matrix: a,
            offset: Vector::zeros(2),
        },
        Component::Zero,
    )
    .expect("rotation bifunction");
    ProblemInstance {
        name: "rotation".into(),
        bifunction,
        set: FeasibleSet::WholeSpace { dim: 2 },
        x0: Vector::from_vec_unchecked(vec![T::one(), T::zero()]),
        known_solution: Some(Vector::zeros(2)),
        monotone: true,
        paramonotone: false,
        strong_modulus: None,
    }
}

/// `f(x, y) = ⟨βx, y − x⟩` on a box containing 0 in its interior.
/// `f(x, y) + f(y, x) = −β‖x − y‖²`, so the unique solution 0 attracts the
/// plain iteration.
pub fn build_strongly_pseudomonotone<T: Scalar>(
    n: usize,
    modulus: T,
    lo: Vector<T>,
    hi: Vector<T>,
) -> Result<ProblemInstance<T>> {
    if !(modulus > T::zero()) || !modulus.is_finite() {
        return Err(Error::InvalidParameter("modulus must be positive".into()));
    }
    check_dim(n, lo.dim())?;
    check_dim(n, hi.dim())?;
    if !lo
        .iter()
        .zip(hi.iter())
        .all(|(&l, &h)| l < T::zero() && T::zero() < h)
    {
        return Err(Error::InvalidParameter(
            "box must contain 0 in its interior".into(),
        ));
    }
    let set = FeasibleSet::boxed(lo, hi.clone())?;
    let mut matrix = Matrix::identity(n);
    for i in 0..n {
        matrix.set(i, i, modulus);
    }
    let bifunction = SplitBifunction::new(
        n,
        Component::Affine {
            matrix,
            offset: Vector::zeros(n),
        },
        Component::Zero,
    )?;
    let half = T::lit(0.5);
    Ok(ProblemInstance {
        name: format!("spm-{n}"),
        bifunction,
        set,
        x0: hi.iter().map(|&h| half * h).collect(),
        known_solution: Some(Vector::zeros(n)),
        monotone: true,
        paramonotone: true,
        strong_modulus: Some(modulus),
    })
}

/// Uniform sample from the box part of a bounded region, projected onto the
/// region when a sum constraint is present.
pub fn random_feasible_point<T: Scalar, R: Rng + ?Sized>(
    set: &FeasibleSet<T>,
    rng: &mut R,
) -> Result<Vector<T>> {
    if !set.is_bounded() {
        return Err(Error::Unsupported("sampling needs a bounded region".into()));
    }
    let (lo, hi) = set.bounds();
    let p: Vector<T> = lo
        .iter()
        .zip(hi.iter())
        .map(|(&l, &h)| l + (h - l) * T::lit(rng.gen::<f64>()))
        .collect();
    set.project(&p)
}

/// Parameter file contents.
///
/// Cournot fields left out fall back to [`CournotParams::standard`] values
/// for the given `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Cournot {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        xi: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_lo: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_hi: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_hi: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
    },
    Op {
        q: Vec<Vec<f64>>,
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
    },
    Rotation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
    },
    Spm {
        n: usize,
        beta: f64,
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
    },
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("problem file: {e}")))
    }

    pub fn build<T: Scalar>(&self) -> Result<ProblemInstance<T>> {
        let vec = |v: &[f64]| Vector::<T>::from_f64s(v);
        let (mut inst, x0) = match self {
            ProblemSpec::Cournot {
                n,
                alpha,
                delta,
                mu,
                xi,
                box_lo,
                box_hi,
                sigma_lo,
                sigma_hi,
                x0,
            } => {
                let mut p = CournotParams::<T>::standard(*n);
                let pick = |field: &Option<Vec<f64>>, default: &mut Vector<T>| -> Result<()> {
                    if let Some(v) = field {
                        *default = vec(v)?;
                    }
                    Ok(())
                };
                pick(alpha, &mut p.alpha)?;
                pick(delta, &mut p.delta)?;
                pick(mu, &mut p.mu)?;
                pick(xi, &mut p.xi)?;
                pick(box_lo, &mut p.box_lo)?;
                pick(box_hi, &mut p.box_hi)?;
                if let Some(s) = sigma_lo {
                    p.sigma_lo = T::lit(*s);
                }
                if let Some(s) = sigma_hi {
                    p.sigma_hi = T::lit(*s);
                }
                (build_cournot(&p)?, x0)
            }
            ProblemSpec::Op {
                q,
                box_lo,
                box_hi,
                x0,
            } => {
                let rows: Vec<Vec<T>> = q
                    .iter()
                    .map(|r| r.iter().map(|&v| T::lit(v)).collect())
                    .collect();
                let p = OpParams {
                    q: Matrix::from_rows(&rows)?,
                    box_lo: vec(box_lo)?,
                    box_hi: vec(box_hi)?,
                };
                (build_op(&p)?, x0)
            }
            ProblemSpec::Rotation { x0 } => (build_rotation(), x0),
            ProblemSpec::Spm {
                n,
                beta,
                box_lo,
                box_hi,
                x0,
            } => (
                build_strongly_pseudomonotone(*n, T::lit(*beta), vec(box_lo)?, vec(box_hi)?)?,
                x0,
            ),
        };
        if let Some(x0) = x0 {
            check_dim(inst.dim(), x0.len())?;
            inst.x0 = vec(x0)?;
        }
        Ok(inst)
    }
}
