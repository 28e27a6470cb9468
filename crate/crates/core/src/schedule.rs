//! Step-size sequences and the normalised step rule.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::scalar::Scalar;

/// A positive sequence `β_k`.
///
/// The algorithm needs `Σβ_k = ∞` and `Σβ_k² < ∞`. [`HarmonicScale`]
/// satisfies both; custom implementations are responsible for it themselves.
pub trait StepSchedule<T>: Send + Sync {
    fn beta_at(&self, k: usize) -> T;

    fn describe(&self) -> String;
}

/// `β_k = c / (k + 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicScale<T> {
    c: T,
}

impl<T: Scalar> HarmonicScale<T> {
    pub fn new(c: T) -> Result<Self> {
        if !c.is_finite() || c <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "harmonic scale must be positive and finite, got {c}"
            )));
        }
        Ok(Self { c })
    }

    pub fn scale(&self) -> T {
        self.c
    }
}

impl<T: Scalar> StepSchedule<T> for HarmonicScale<T> {
    fn beta_at(&self, k: usize) -> T {
        self.c / T::from_usize_lossy(k + 1)
    }

    fn describe(&self) -> String {
        format!("{}/(k+1)", self.c)
    }
}

impl<T: Scalar> fmt::Display for HarmonicScale<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

/// Normalised step: `η = max{β, ‖g₁‖, ‖g₂‖}` and `λ = β/η`, so `0 < λ ≤ 1`.
pub fn step_size<T: Scalar>(beta: T, g1: &[T], g2: &[T]) -> Result<(T, T)> {
    if !beta.is_finite() || beta <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    let (n1, n2) = (norm(g1), norm(g2));
    if !n1.is_finite() || !n2.is_finite() {
        return Err(Error::NonFinite("subgradient"));
    }
    let eta = beta.max(n1).max(n2);
    Ok((eta, beta / eta))
}
