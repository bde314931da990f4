//! Numerical maximization of `Tr[|ψ₀⟩⟨ψ₀|^{⊗2} R]` over covariant channels.
//!
//! A covariant Choi operator is block diagonal over the phase classes: a
//! weight `c_k ≥ 0` on each `|kk⟩` and a 2×2 PSD block on each
//! `span{|ij⟩, |ji⟩}`. With diagonal block entries `x_ij` (on `|ij⟩`) and
//! `x_ji`, the best admissible coherence is `√(x_ij x_ji)`, so the fidelity is
//!
//! ```text
//! F = (Σ_k c_k + Σ_{i<j} (√x_ij + √x_ji)²) / d²
//! ```
//!
//! and `Tr_1[R] = I` says that, for every reference slot `k`, the weights
//! `c_k` and `x_ik` (`i ≠ k`) form a probability vector. Collecting them as
//! columns of a matrix `X` (with `X_kk = c_k`), the feasible set is the set of
//! column-stochastic matrices and `F` is concave on it. We run exponentiated
//! gradient ascent with a backtracking step and stop on the Frank–Wolfe
//! duality gap, which bounds the distance to the true maximum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::{choi_fidelity, OptimalError};
use crate::channel::ChoiOperator;
use crate::linalg::ComplexMatrix;

const DEFAULT_SEED: u64 = 12345;
const MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Fidelity of the returned operator.
    pub value: f64,
    pub choi: ChoiOperator,
    /// Weights `c_k` on `|kk⟩⟨kk|`.
    pub singleton_weights: Vec<f64>,
    /// `X[i][k]`: diagonal weight on `|ik⟩`.
    pub weights: Vec<Vec<f64>>,
    /// Upper bound on `F_max − value`.
    pub gap_bound: f64,
    pub iterations: usize,
}

/// [`oracle_max_fidelity_seeded`] with the default starting seed.
pub fn oracle_max_fidelity(d: usize, tol: f64) -> Result<OracleResult, OptimalError> {
    oracle_max_fidelity_seeded(d, tol, DEFAULT_SEED)
}

/// Maximize the fidelity over covariant CPT maps from a random interior start.
///
/// Returns once the certified gap is at most `tol`, or
/// [`OptimalError::NotConverged`] carrying the best value found.
pub fn oracle_max_fidelity_seeded(
    d: usize,
    tol: f64,
    seed: u64,
) -> Result<OracleResult, OptimalError> {
    run(d, tol, seed, MAX_ITERATIONS)
}

fn run(d: usize, tol: f64, seed: u64, max_iterations: usize) -> Result<OracleResult, OptimalError> {
    if !(2..=8).contains(&d) {
        return Err(OptimalError::OracleDimension(d));
    }
    let norm = (d * d) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // log-weights, column k = reference slot k
    let mut logx = vec![vec![0.0; d]; d];
    for k in 0..d {
        for row in logx.iter_mut() {
            let e: f64 = Exp1.sample(&mut rng);
            row[k] = e.ln();
        }
    }
    normalize_columns(&mut logx);
    let mut x = exp_all(&logx);
    let mut current = deficit(&logx);
    let mut step = 0.5;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < max_iterations {
        let g = gradient(&logx);
        gap = duality_gap(&x, &g);
        if gap / norm <= tol {
            break;
        }
        iterations += 1;
        loop {
            let mut trial = logx.clone();
            for (row, grow) in trial.iter_mut().zip(&g) {
                for (v, gv) in row.iter_mut().zip(grow) {
                    *v += step * gv;
                }
            }
            normalize_columns(&mut trial);
            let trial_deficit = deficit(&trial);
            if trial_deficit <= current || step < 1e-12 {
                logx = trial;
                current = trial_deficit;
                x = exp_all(&logx);
                step = (step * 1.5).min(4.0);
                break;
            }
            step *= 0.5;
        }
    }

    let choi = build_choi(&x);
    let value = choi_fidelity(&choi);
    let gap_bound = gap / norm;
    if gap_bound > tol {
        return Err(OptimalError::NotConverged {
            best: value,
            gap_bound,
            iterations,
        });
    }
    Ok(OracleResult {
        value,
        choi,
        singleton_weights: (0..d).map(|k| x[k][k]).collect(),
        weights: x,
        gap_bound,
        iterations,
    })
}

fn normalize_columns(logx: &mut [Vec<f64>]) {
    let d = logx.len();
    for k in 0..d {
        let max = logx.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logx.iter().map(|r| (r[k] - max).exp()).sum::<f64>().ln();
        for row in logx.iter_mut() {
            row[k] -= lse;
        }
    }
}

fn exp_all(logx: &[Vec<f64>]) -> Vec<Vec<f64>> {
    logx.iter()
        .map(|r| r.iter().map(|v| v.exp()).collect())
        .collect()
}

/// `d² · F`.
#[cfg(test)]
fn objective(x: &[Vec<f64>]) -> f64 {
    let d = x.len();
    let mut f = 0.0;
    for i in 0..d {
        f += x[i][i];
        for j in (i + 1)..d {
            let s = x[i][j].sqrt() + x[j][i].sqrt();
            f += s * s;
        }
    }
    f
}

/// `2d − d²F` on column-stochastic `X`, from the identity
/// `d²F = 2 Σ_ik x_ik − Σ_k c_k − Σ_{i<j} (√x_ij − √x_ji)²`.
///
/// Every term is nonnegative and evaluated from log-weights, so comparisons
/// stay exact to relative precision even when the changes are far below the
/// resolution of `F` itself.
fn deficit(logx: &[Vec<f64>]) -> f64 {
    let d = logx.len();
    let mut total = 0.0;
    for i in 0..d {
        total += logx[i][i].exp();
        for j in (i + 1)..d {
            let diff = (0.5 * logx[i][j]).exp() * (0.5 * (logx[j][i] - logx[i][j])).exp_m1();
            total += diff * diff;
        }
    }
    total
}

/// `∂/∂x_ij = 1 + √(x_ji / x_ij)` off the diagonal, evaluated from log-weights.
fn gradient(logx: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = logx.len();
    let mut g = vec![vec![1.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            if i != j {
                g[i][j] = 1.0 + (0.5 * (logx[j][i] - logx[i][j])).exp();
            }
        }
    }
    g
}

/// `Σ_k (max_i g_ik − Σ_i x_ik g_ik)`: the Frank–Wolfe gap over the product of column simplices.
fn duality_gap(x: &[Vec<f64>], g: &[Vec<f64>]) -> f64 {
    let d = x.len();
    (0..d)
        .map(|k| {
            let best = (0..d).map(|i| g[i][k]).fold(f64::NEG_INFINITY, f64::max);
            let current: f64 = (0..d).map(|i| x[i][k] * g[i][k]).sum();
            best - current
        })
        .sum()
}

fn build_choi(x: &[Vec<f64>]) -> ChoiOperator {
    let d = x.len();
    let n = d * d;
    let mut r = ComplexMatrix::zeros(n, n);
    for i in 0..d {
        r[(i * d + i, i * d + i)] = x[i][i].into();
        for j in (i + 1)..d {
            let (ij, ji) = (i * d + j, j * d + i);
            let coherence = (x[i][j] * x[j][i]).sqrt();
            r[(ij, ij)] = x[i][j].into();
            r[(ji, ji)] = x[j][i].into();
            r[(ij, ji)] = coherence.into();
            r[(ji, ij)] = coherence.into();
        }
    }
    ChoiOperator::new(d, r).expect("d² × d²")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{is_cpt, is_phase_covariant};

    #[test]
    fn qubit_reaches_one() {
        let res = oracle_max_fidelity(2, 1e-9).unwrap();
        assert!((res.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn maximizer_is_a_covariant_channel() {
        let res = oracle_max_fidelity(4, 1e-8).unwrap();
        assert!(is_cpt(&res.choi, 1e-9).passed());
        assert!(is_phase_covariant(&res.choi, 1e-12, 10, 1));
        assert!((res.value - 0.5).abs() <= 1e-8 + 1e-12);
    }

    #[test]
    fn objective_at_uniform_point() {
        // X_ik = 1/d everywhere: F = (d·(1/d) + C(d,2)·4/d)/d² = (1 + 2(d−1))/d².
        let d = 5;
        let x = vec![vec![1.0 / d as f64; d]; d];
        let f = objective(&x) / (d * d) as f64;
        assert!((f - (2.0 * d as f64 - 1.0) / (d * d) as f64).abs() < 1e-15);
    }

    #[test]
    fn deficit_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 2..7 {
            let mut logx: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..d).map(|_| Exp1.sample(&mut rng)).map(f64::ln).collect())
                .collect();
            normalize_columns(&mut logx);
            let f = objective(&exp_all(&logx));
            assert!((2.0 * d as f64 - deficit(&logx) - f).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_out_of_range_dimension() {
        assert!(matches!(
            oracle_max_fidelity(1, 1e-6),
            Err(OptimalError::OracleDimension(1))
        ));
        assert!(matches!(
            oracle_max_fidelity(9, 1e-6),
            Err(OptimalError::OracleDimension(9))
        ));
    }

    #[test]
    fn impossible_tolerance_reports_best_value() {
        match run(3, 1e-12, DEFAULT_SEED, 3) {
            Err(OptimalError::NotConverged { best, .. }) => {
                assert!(best > 0.0 && best <= 2.0 / 3.0 + 1e-12);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
