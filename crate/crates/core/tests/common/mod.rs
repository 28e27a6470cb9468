//! Brute-force reference solvers shared by the integration tests.
#![allow(dead_code)]

use eqsplit::{Matrix, Vector};
use rand::Rng;

/// A random instance of `min Σ ½ d_i (y_i − t_i)²` over a box with a
/// two-sided sum constraint.
#[derive(Clone, Debug)]
pub struct SumBoxInstance {
    pub d: Vec<f64>,
    pub t: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub sum_lo: f64,
    pub sum_hi: f64,
}

impl SumBoxInstance {
    pub fn random<R: Rng>(rng: &mut R, max_dim: usize) -> Self {
        let n = rng.gen_range(1..=max_dim);
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..5.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..0.5)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.3..3.0)).collect();
        let (smin, smax): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
        let a = rng.gen_range(smin..smax);
        let (sum_lo, sum_hi) = match rng.gen_range(0..4) {
            0 => (a, a),
            1 => (f64::NEG_INFINITY, a),
            2 => (a, f64::INFINITY),
            _ => {
                let b = rng.gen_range(smin..smax);
                (a.min(b), a.max(b))
            }
        };
        Self {
            d,
            t,
            lo,
            hi,
            sum_lo,
            sum_hi,
        }
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        (0..y.len())
            .map(|i| 0.5 * self.d[i] * (y[i] - self.t[i]).powi(2))
            .sum()
    }
}

/// Nested one-dimensional grid search. Each coordinate is gridded over its
/// feasible interval given the earlier ones, zooming to the cells around the
/// best point; the last coordinate is minimised exactly. Partial minimisation
/// of a convex function is convex, and the minimiser of a convex function on
/// an interval lies within one cell of the best grid point, so the zoom never
/// loses it.
pub fn sum_box_grid_oracle(p: &SumBoxInstance) -> Vec<f64> {
    let mut head = Vec::with_capacity(p.d.len());
    grid_level(p, &mut head).1
}

fn grid_level(p: &SumBoxInstance, head: &mut Vec<f64>) -> (f64, Vec<f64>) {
    const POINTS: usize = 41;
    let n = p.d.len();
    let j = head.len();
    let s: f64 = head.iter().sum();
    let rest_lo: f64 = p.lo[j + 1..].iter().sum();
    let rest_hi: f64 = p.hi[j + 1..].iter().sum();
    let lo = p.lo[j].max(p.sum_lo - s - rest_hi);
    let hi = p.hi[j].min(p.sum_hi - s - rest_lo).max(lo);
    if j + 1 == n {
        let mut y = head.clone();
        y.push(p.t[j].max(lo).min(hi));
        return (p.objective(&y), y);
    }
    let (mut a, mut b) = (lo, hi);
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let step = (b - a) / (POINTS - 1) as f64;
        let mut round = (f64::INFINITY, a);
        for k in 0..POINTS {
            let v = if k + 1 == POINTS {
                b
            } else {
                a + step * k as f64
            };
            head.push(v);
            let cand = grid_level(p, head);
            head.pop();
            if cand.0 < round.0 {
                round = (cand.0, v);
            }
            if cand.0 < best.0 {
                best = cand;
            }
        }
        let best_at = round.1;
        if b - a < 1e-12 {
            return best;
        }
        (a, b) = (
            (best_at - 2.0 * step).max(lo),
            (best_at + 2.0 * step).min(hi),
        );
    }
}

/// Enumerates every active set (each coordinate at a bound or free, the sum
/// constraint at either side or inactive) and keeps the candidate that
/// satisfies the KKT conditions.
pub fn sum_box_active_set_oracle(p: &SumBoxInstance) -> Vec<f64> {
    let n = p.d.len();
    let tol = 1e-10;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let cases = 3usize.pow(n as u32);
    for code in 0..cases {
        let status: Vec<usize> = (0..n).map(|i| (code / 3usize.pow(i as u32)) % 3).collect();
        for sum_side in 0..3 {
            let target = match sum_side {
                0 => None,
                1 if p.sum_lo.is_finite() => Some(p.sum_lo),
                2 if p.sum_hi.is_finite() => Some(p.sum_hi),
                _ => continue,
            };
            let fixed: f64 = (0..n)
                .map(|i| match status[i] {
                    0 => p.lo[i],
                    1 => p.hi[i],
                    _ => 0.0,
                })
                .sum();
            let free: Vec<usize> = (0..n).filter(|&i| status[i] == 2).collect();
            let nu = match target {
                None => Some(0.0),
                Some(s) if free.is_empty() => {
                    if (fixed - s).abs() > tol {
                        continue;
                    }
                    None
                }
                Some(s) => {
                    let inv: f64 = free.iter().map(|&i| 1.0 / p.d[i]).sum();
                    let tsum: f64 = free.iter().map(|&i| p.t[i]).sum();
                    Some((tsum + fixed - s) / inv)
                }
            };
            let y: Vec<f64> = (0..n)
                .map(|i| match status[i] {
                    0 => p.lo[i],
                    1 => p.hi[i],
                    _ => p.t[i] - nu.unwrap_or(0.0) / p.d[i],
                })
                .collect();
            let sum: f64 = y.iter().sum();
            let feasible = (0..n).all(|i| y[i] >= p.lo[i] - tol && y[i] <= p.hi[i] + tol)
                && sum >= p.sum_lo - tol
                && sum <= p.sum_hi + tol;
            if !feasible {
                continue;
            }
            // admissible multipliers: sign from the active sum side, plus
            // d_i(y_i − t_i) + ν ≥ 0 at lower bounds and ≤ 0 at upper bounds
            let (mut nu_lo, mut nu_hi) = match sum_side {
                0 => (0.0, 0.0),
                1 => (f64::NEG_INFINITY, 0.0),
                _ => (0.0, f64::INFINITY),
            };
            for i in 0..n {
                let g = p.d[i] * (y[i] - p.t[i]);
                match status[i] {
                    0 => nu_lo = nu_lo.max(-g),
                    1 => nu_hi = nu_hi.min(-g),
                    _ => {}
                }
            }
            let kkt = match nu {
                Some(v) => v >= nu_lo - tol && v <= nu_hi + tol,
                None => nu_lo <= nu_hi + tol,
            };
            let val = p.objective(&y);
            if kkt && best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, y));
            }
        }
    }
    best.expect("some active set satisfies KKT").1
}

/// `−λ ln(1 + max{0, y}) + ½(y − z)²`.
pub fn log_objective(lambda: f64, z: f64, y: f64) -> f64 {
    -lambda * (1.0 + y.max(0.0)).ln() + 0.5 * (y - z).powi(2)
}

/// Coarse grid over `[lo, hi]` followed by a 1e-7-spaced grid around the
/// coarse winner.
pub fn log_1d_grid_oracle(lambda: f64, z: f64, lo: f64, hi: f64) -> f64 {
    let argmin = |a: f64, b: f64, count: usize| {
        let mut best = (f64::INFINITY, a);
        for j in 0..=count {
            let y = (a + (b - a) * j as f64 / count as f64).min(b);
            let v = log_objective(lambda, z, y);
            if v < best.0 {
                best = (v, y);
            }
        }
        best.1
    };
    let coarse_count = 20_000;
    let coarse = argmin(lo, hi, coarse_count);
    let step = (hi - lo) / coarse_count as f64;
    let (a, b) = ((coarse - 2.0 * step).max(lo), (coarse + 2.0 * step).min(hi));
    let fine_count = (((b - a) / 1e-7).ceil() as usize).max(1);
    argmin(a, b, fine_count)
}

/// `½xᵀQx − Σ ln(1 + max{0, x_i})` minimised over a box by projected
/// gradient with step `1/L`, `L = ‖Q‖_∞ + 1`.
pub fn op_projected_gradient(q: &Matrix<f64>, lo: &[f64], hi: &[f64], iters: usize) -> Vec<f64> {
    let n = lo.len();
    let l = q.max_abs_row_sum() + 1.0;
    let mut x: Vec<f64> = (0..n).map(|i| 0.5 * (lo[i] + hi[i])).collect();
    for _ in 0..iters {
        let qx = q.mul_vec(&x);
        for i in 0..n {
            let g = qx[i] - if x[i] > 0.0 { 1.0 / (1.0 + x[i]) } else { 0.0 };
            x[i] = (x[i] - g / l).clamp(lo[i], hi[i]);
        }
    }
    x
}

/// `MᵀM` for a random `M` with entries in `[−1, 1]`.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> Matrix<f64> {
    let m: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut q = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            q.set(i, j, (0..n).map(|k| m[k][i] * m[k][j]).sum());
        }
    }
    q
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn vector(v: &[f64]) -> Vector<f64> {
    Vector::from_f64s(v).expect("finite entries")
}
