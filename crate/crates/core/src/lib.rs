//! Splitting subgradient solver for equilibrium problems
//!
//! ```text
//!     find x ∈ S  such that  f(x, y) ≥ 0  for all y ∈ S,     f = f₁ + f₂
//! ```
//!
//! Each iteration takes one proximal step on `f₁` and one on `f₂`, with a
//! step length normalised by the diagonal subgradients. The iterates, their
//! λ-weighted ergodic average, or the average with restarts can be used as
//! the output sequence.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.
//!
//! ```
//! use eqsplit::{problems, solver, HarmonicScale, Mode, SolverConfig};
//!
//! let inst = problems::build_cournot(&problems::CournotParams::<f64>::standard(2)).unwrap();
//! let cfg = SolverConfig::new(Mode::ErgodicWithRestart, HarmonicScale::new(10.0).unwrap());
//! let report = solver::run(&inst.bifunction, &inst.set, &inst.x0, &cfg).unwrap();
//! assert_eq!(report.iterations, 2);
//! ```

pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod problems;
pub mod prox;
pub mod scalar;
pub mod schedule;
pub mod solver;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use model::{
    contains_point, Component, FeasibleSet, ProxKind, SmoothBifunction, SplitBifunction,
};
pub use problems::ProblemInstance;
pub use scalar::Scalar;
pub use schedule::{step_size, HarmonicScale, StepSchedule};
pub use solver::{
    iterate_once, run, IterationRecord, Mode, SolveReport, SolverConfig, SolverState, Status,
};

pub type Vector64 = Vector<f64>;
pub type Matrix64 = Matrix<f64>;
pub type FeasibleSet64 = FeasibleSet<f64>;
pub type Component64 = Component<f64>;
pub type SplitBifunction64 = SplitBifunction<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverState64 = SolverState<f64>;
pub type IterationRecord64 = IterationRecord<f64>;
pub type SolveReport64 = SolveReport<f64>;
pub type ProblemInstance64 = ProblemInstance<f64>;

pub type Vector32 = Vector<f32>;
pub type FeasibleSet32 = FeasibleSet<f32>;
pub type SplitBifunction32 = SplitBifunction<f32>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type SolveReport32 = SolveReport<f32>;
