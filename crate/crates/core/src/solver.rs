//! The splitting iteration
//!
//! ```text
//!     g_i   ∈ ∂₂f_i(x, x)
//!     η     = max{β_k, ‖g₁‖, ‖g₂‖},   λ = β_k / η
//!     y     = argmin { λ f₁(x, ·) + ½‖· − x‖² }   over S
//!     x⁺    = argmin { λ f₂(x, ·) + ½‖· − y‖² }   over S
//! ```
//!
//! together with the λ-weighted ergodic average of the iterates and an
//! optional restart controller that re-seeds the iteration from the current
//! point once the average stalls.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, Vector};
use crate::model::{FeasibleSet, SplitBifunction, CONTAINMENT_TOL};
use crate::prox::{prox_component, ProxRequest};
use crate::scalar::Scalar;
use crate::schedule::{step_size, StepSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Stop on `‖x^{k+1} − x^k‖`; report the last iterate.
    Plain,
    /// Stop on movement of the ergodic average; report the average.
    Ergodic,
    /// Ergodic, plus restart from the current iterate when the average stalls.
    #[value(name = "ergodic-restart")]
    ErgodicWithRestart,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Plain => "plain",
            Mode::Ergodic => "ergodic",
            Mode::ErgodicWithRestart => "ergodic-restart",
        })
    }
}

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_STOP_EPS: f64 = 1e-4;
pub const DEFAULT_RESTART_TAU: f64 = 1e-3;

#[derive(Clone)]
pub struct SolverConfig<T> {
    pub mode: Mode,
    pub schedule: Arc<dyn StepSchedule<T>>,
    pub max_iter: usize,
    pub stop_eps: T,
    pub restart_tau: T,
    /// Restart the `β_k` sequence at `k = 0`.
    pub reset_schedule_on_restart: bool,
    /// Drop the ergodic sums on restart.
    pub reset_ergodic_on_restart: bool,
}

impl<T: Scalar> fmt::Debug for SolverConfig<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverConfig")
            .field("mode", &self.mode)
            .field("schedule", &self.schedule.describe())
            .field("max_iter", &self.max_iter)
            .field("stop_eps", &self.stop_eps)
            .field("restart_tau", &self.restart_tau)
            .field("reset_schedule_on_restart", &self.reset_schedule_on_restart)
            .field("reset_ergodic_on_restart", &self.reset_ergodic_on_restart)
            .finish()
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(mode: Mode, schedule: impl StepSchedule<T> + 'static) -> Self {
        Self {
            mode,
            schedule: Arc::new(schedule),
            max_iter: DEFAULT_MAX_ITER,
            stop_eps: T::lit(DEFAULT_STOP_EPS),
            restart_tau: T::lit(DEFAULT_RESTART_TAU),
            reset_schedule_on_restart: true,
            reset_ergodic_on_restart: true,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_stop_eps(mut self, eps: T) -> Self {
        self.stop_eps = eps;
        self
    }

    pub fn with_restart_tau(mut self, tau: T) -> Self {
        self.restart_tau = tau;
        self
    }

    pub fn with_restart_resets(mut self, schedule: bool, ergodic: bool) -> Self {
        self.reset_schedule_on_restart = schedule;
        self.reset_ergodic_on_restart = ergodic;
        self
    }

    /// Checks the invariants and returns warnings for legal but odd settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(self.stop_eps > T::zero()) || !self.stop_eps.is_finite() {
            return Err(Error::InvalidParameter("stop_eps must be positive".into()));
        }
        if !(self.restart_tau > T::zero()) || !self.restart_tau.is_finite() {
            return Err(Error::InvalidParameter(
                "restart_tau must be positive".into(),
            ));
        }
        let mut warnings = Vec::new();
        if self.mode == Mode::ErgodicWithRestart && self.restart_tau < self.stop_eps {
            warnings.push(format!(
                "restart_tau {} is below stop_eps {}; restarts can never fire",
                self.restart_tau, self.stop_eps
            ));
        }
        Ok(warnings)
    }
}

/// Everything the iteration carries from one step to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T> {
    /// Global iteration counter.
    pub k: usize,
    /// Index fed to the step schedule; differs from `k` after a restart.
    pub schedule_index: usize,
    pub x: Vector<T>,
    pub y: Option<Vector<T>>,
    pub lambda_sum: T,
    pub z_numerator: Vector<T>,
    pub z: Option<Vector<T>>,
    pub last_z: Option<Vector<T>>,
    pub restart_count: usize,
    pub iters_since_restart: usize,
}

impl<T: Scalar> SolverState<T> {
    pub fn new(x0: Vector<T>) -> Self {
        let n = x0.dim();
        Self {
            k: 0,
            schedule_index: 0,
            x: x0,
            y: None,
            lambda_sum: T::zero(),
            z_numerator: Vector::zeros(n),
            z: None,
            last_z: None,
            restart_count: 0,
            iters_since_restart: 0,
        }
    }

    /// Adds `weight · point` to the ergodic sums and refreshes `z`.
    pub fn accumulate(&mut self, weight: T, point: &[T]) {
        for (acc, &p) in self.z_numerator.iter_mut().zip(point) {
            *acc = *acc + weight * p;
        }
        self.lambda_sum = self.lambda_sum + weight;
        let z = self.ergodic_point().ok();
        self.last_z = std::mem::replace(&mut self.z, z);
    }

    /// `Σλ_i x^i / Σλ_i`.
    pub fn ergodic_point(&self) -> Result<Vector<T>> {
        if !(self.lambda_sum > T::zero()) {
            return Err(Error::State(
                "ergodic average needs at least one iteration".into(),
            ));
        }
        Ok(self
            .z_numerator
            .iter()
            .map(|&v| v / self.lambda_sum)
            .collect())
    }

    fn restart(&mut self, reset_schedule: bool, reset_ergodic: bool) {
        self.restart_count += 1;
        self.iters_since_restart = 0;
        if reset_schedule {
            self.schedule_index = 0;
        }
        if reset_ergodic {
            self.lambda_sum = T::zero();
            self.z_numerator = Vector::zeros(self.x.dim());
            self.z = None;
            self.last_z = None;
        }
    }
}

/// One row of the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IterationRecord<T> {
    pub k: usize,
    pub beta: T,
    pub eta: T,
    pub lambda: T,
    /// Movement of the ergodic average; absent on the first iteration after
    /// a reset of the averages.
    pub delta_z: Option<T>,
    pub restarted: bool,
    pub x: Vector<T>,
    pub y: Vector<T>,
    pub x_next: Vector<T>,
    pub z: Vector<T>,
    pub bisection_iterations: usize,
    pub generic_residual: Option<T>,
}

/// Runs one splitting step from `state` with step parameter `beta`.
pub fn iterate_once<T: Scalar>(
    f: &SplitBifunction<T>,
    set: &FeasibleSet<T>,
    state: &SolverState<T>,
    beta: T,
) -> Result<(SolverState<T>, IterationRecord<T>)> {
    let x = &state.x;
    if !x.is_finite() {
        return Err(Error::NonFinite("iterate"));
    }
    let g1 = f.diag_subgrad1(x);
    let g2 = f.diag_subgrad2(x);
    let (eta, lambda) = step_size(beta, &g1, &g2)?;

    let first = prox_component(f.first(), x, &ProxRequest::new(lambda, x, set)?)?;
    let y = first.point;
    let second = prox_component(f.second(), x, &ProxRequest::new(lambda, &y, set)?)?;
    let x_next = second.point;
    if !y.is_finite() || !x_next.is_finite() {
        return Err(Error::NonFinite("iterate"));
    }

    let mut next = state.clone();
    next.accumulate(lambda, x);
    let z = next.z.clone().expect("lambda is positive");
    let delta_z = state.z.as_ref().map(|prev| dist(&z, prev));
    next.k += 1;
    next.schedule_index += 1;
    next.iters_since_restart += 1;
    next.x = x_next.clone();
    next.y = Some(y.clone());

    let generic_residual = match (
        first.diagnostics.generic_residual,
        second.diagnostics.generic_residual,
    ) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    let record = IterationRecord {
        k: state.k,
        beta,
        eta,
        lambda,
        delta_z,
        restarted: false,
        x: x.clone(),
        y,
        x_next,
        z,
        bisection_iterations: first.diagnostics.bisection_iterations
            + second.diagnostics.bisection_iterations,
        generic_residual,
    };
    Ok((next, record))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIterReached,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "Converged",
            Status::MaxIterReached => "MaxIterReached",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub result: Vector<T>,
    pub status: Status,
    pub iterations: usize,
    pub restarts: usize,
    /// Iterations after the most recent restart, counting the final one.
    pub iterations_since_restart: usize,
    pub trace: Vec<IterationRecord<T>>,
    pub warnings: Vec<String>,
    pub final_state: SolverState<T>,
}

/// A failed run keeps whatever trace it produced before the failure.
#[derive(Clone, Debug, thiserror::Error)]
#[error("{error} (after {} iterations)", trace.len())]
pub struct SolveFailure<T: Scalar> {
    pub error: Error,
    pub trace: Vec<IterationRecord<T>>,
}

impl<T: Scalar> From<Error> for SolveFailure<T> {
    fn from(error: Error) -> Self {
        Self {
            error,
            trace: Vec::new(),
        }
    }
}

/// Drives [`iterate_once`] until the configured stopping rule fires.
///
/// An infeasible `x0` is projected onto `set` first; the report records a
/// warning when that happens.
pub fn run<T: Scalar>(
    f: &SplitBifunction<T>,
    set: &FeasibleSet<T>,
    x0: &[T],
    cfg: &SolverConfig<T>,
) -> std::result::Result<SolveReport<T>, SolveFailure<T>> {
    let mut warnings = cfg.validate()?;
    crate::linalg::check_dim(f.dim(), set.dim())?;
    crate::linalg::check_dim(f.dim(), x0.len())?;
    let x0 = Vector::new(x0.to_vec())?;
    let x0 = if set.contains(&x0, T::lit(CONTAINMENT_TOL)) {
        x0
    } else {
        warnings.push("starting point was infeasible and has been projected".into());
        set.project(&x0)?
    };

    let mut state = SolverState::new(x0);
    let mut trace: Vec<IterationRecord<T>> = Vec::new();
    let mut status = Status::MaxIterReached;
    let mut result = None;

    while state.k < cfg.max_iter {
        let beta = cfg.schedule.beta_at(state.schedule_index);
        let (mut next, mut record) = match iterate_once(f, set, &state, beta) {
            Ok(step) => step,
            Err(error) => return Err(SolveFailure { error, trace }),
        };
        match cfg.mode {
            Mode::Plain => {
                if dist(&record.x_next, &record.x) < cfg.stop_eps {
                    status = Status::Converged;
                    result = Some(record.x_next.clone());
                }
            }
            Mode::Ergodic | Mode::ErgodicWithRestart => {
                if let (Some(dz), true) = (record.delta_z, next.iters_since_restart >= 2) {
                    if dz < cfg.stop_eps {
                        status = Status::Converged;
                        result = Some(record.z.clone());
                    } else if cfg.mode == Mode::ErgodicWithRestart && dz <= cfg.restart_tau {
                        next.restart(cfg.reset_schedule_on_restart, cfg.reset_ergodic_on_restart);
                        record.restarted = true;
                    }
                }
            }
        }
        trace.push(record);
        state = next;
        if status == Status::Converged {
            break;
        }
    }

    let result = match result {
        Some(r) => r,
        None => match cfg.mode {
            Mode::Plain => state.x.clone(),
            _ => trace
                .last()
                .map(|r| r.z.clone())
                .unwrap_or_else(|| state.x.clone()),
        },
    };
    Ok(SolveReport {
        result,
        status,
        iterations: state.k,
        restarts: state.restart_count,
        iterations_since_restart: state.iters_since_restart,
        trace,
        warnings,
        final_state: state,
    })
}
