//! Optimal phase-covariant conjugation channels and their fidelities.
//!
//! Each NSB matrix `b` defines the channel
//! `T(ρ) = Σ_{i>j} b_ij T_ij ρ T_ij` with `T_ij = |i⟩⟨j| + |j⟩⟨i|`, whose
//! Choi operator is `Σ_{i>j} b_ij (|ij⟩ + |ji⟩)(⟨ij| + ⟨ji|)`. All of them
//! reach the fidelity `2/d` on every equatorial state.

mod oracle;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{apply_kraus, ChannelError, ChoiOperator, KrausChannel};
use crate::dilation::pair_swap;
use crate::linalg::ComplexMatrix;
use crate::nsb::NsbMatrix;
use crate::states::{conjugated_state, equatorial_state, PhaseVector};

pub use oracle::{oracle_max_fidelity, oracle_max_fidelity_seeded, OracleResult};

/// Pairs with `b_ij` below this are left out of the Kraus form.
pub const KRAUS_PRUNE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimalError {
    #[error("need at least one sample")]
    NoSamples,
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("oracle supports 2 <= d <= 8, got {0}")]
    OracleDimension(usize),
    #[error(
        "oracle did not reach tolerance after {iterations} iterations \
         (best {best}, gap bound {gap_bound:e})"
    )]
    NotConverged {
        best: f64,
        gap_bound: f64,
        iterations: usize,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// `Σ_{i>j} b_ij (|ij⟩ + |ji⟩)(⟨ij| + ⟨ji|)`.
pub fn optimal_choi(b: &NsbMatrix) -> ChoiOperator {
    let d = b.d();
    let n = d * d;
    let mut r = ComplexMatrix::zeros(n, n);
    for (i, j, w) in b.lower_pairs() {
        let w = Complex64::new(w, 0.0);
        let (ij, ji) = (i * d + j, j * d + i);
        for x in [ij, ji] {
            for y in [ij, ji] {
                r[(x, y)] += w;
            }
        }
    }
    ChoiOperator::new(d, r).expect("d² × d² by construction")
}

/// Kraus operators `√b_ij · T_ij` for every pair with `b_ij ≥ KRAUS_PRUNE`.
pub fn optimal_kraus(b: &NsbMatrix) -> KrausChannel {
    let d = b.d();
    let ops = b
        .lower_pairs()
        .filter(|&(_, _, w)| w >= KRAUS_PRUNE)
        .map(|(i, j, w)| {
            pair_swap(i, j, d)
                .expect("i > j within range")
                .scale_real(w.sqrt())
        })
        .collect();
    KrausChannel::new(ops, 1e-9).expect("bistochastic weights give a complete set")
}

/// Optimal phase-covariant fidelity, `2/d`.
pub fn analytic_fidelity(d: usize) -> f64 {
    2.0 / d as f64
}

/// Fidelity of the optimal universal transposition, `2/(d+1)`.
pub fn universal_fidelity(d: usize) -> f64 {
    2.0 / (d as f64 + 1.0)
}

/// Fidelity of optimal single-copy multi-phase estimation, `(2d−1)/d²`.
pub fn phase_estimation_fidelity(d: usize) -> f64 {
    let d = d as f64;
    (2.0 * d - 1.0) / (d * d)
}

/// `Tr[|ψ₀⟩⟨ψ₀|^{⊗2} R]`, i.e. the sum of all entries of `R` over `d²`.
///
/// For a covariant `R` this is the fidelity at every phase. For any `R`,
/// `choi_fidelity(twirl(R))` is the phase-averaged fidelity.
pub fn choi_fidelity(r: &ChoiOperator) -> f64 {
    let d = r.d() as f64;
    let total: Complex64 = r.matrix().as_slice().iter().sum();
    total.re / (d * d)
}

/// `⟨ψ*(φ)| T(|ψ(φ)⟩⟨ψ(φ)|) |ψ*(φ)⟩`.
pub fn pointwise_fidelity(ch: &KrausChannel, pv: &PhaseVector) -> Result<f64, OptimalError> {
    if pv.d() != ch.d() {
        return Err(ChannelError::DimensionMismatch(format!(
            "phase vector for d = {} with a channel on d = {}",
            pv.d(),
            ch.d()
        ))
        .into());
    }
    let input = equatorial_state(pv).density_matrix();
    let out = apply_kraus(ch, &input)?;
    Ok(conjugated_state(pv).expectation(&out).re)
}

/// Mean and standard error of the pointwise fidelity over `n` i.i.d. uniform phase vectors.
pub fn monte_carlo_fidelity(
    ch: &KrausChannel,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64), OptimalError> {
    if n_samples == 0 {
        return Err(OptimalError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_samples)
        .map(|_| {
            let pv = PhaseVector::random(ch.d(), &mut rng).map_err(ChannelError::from)?;
            pointwise_fidelity(ch, &pv)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(mean_stderr(&samples))
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance (population form) of a slice.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub d: usize,
    pub analytic: f64,
    pub pointwise_samples: Vec<(PhaseVector, f64)>,
    pub monte_carlo_mean: f64,
    pub monte_carlo_stderr: f64,
}

/// Analytic value, `n_pointwise` explicit samples and an `n_monte_carlo` estimate.
pub fn fidelity_report(
    ch: &KrausChannel,
    n_pointwise: usize,
    n_monte_carlo: usize,
    seed: u64,
) -> Result<FidelityReport, OptimalError> {
    let d = ch.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pointwise_samples = Vec::with_capacity(n_pointwise);
    for _ in 0..n_pointwise {
        let pv = PhaseVector::random(d, &mut rng).map_err(ChannelError::from)?;
        let f = pointwise_fidelity(ch, &pv)?;
        pointwise_samples.push((pv, f));
    }
    let (monte_carlo_mean, monte_carlo_stderr) =
        monte_carlo_fidelity(ch, n_monte_carlo, seed.wrapping_add(1))?;
    Ok(FidelityReport {
        d,
        analytic: analytic_fidelity(d),
        pointwise_samples,
        monte_carlo_mean,
        monte_carlo_stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityRow {
    pub d: usize,
    /// `2/d`
    pub opt: f64,
    /// `2/(d+1)`
    pub universal: f64,
    /// `(2d−1)/d²`
    pub phase_est: f64,
}

/// One row per `d = 2..=d_max`.
pub fn fidelity_table(d_max: usize) -> Result<Vec<FidelityRow>, OptimalError> {
    if d_max < 2 {
        return Err(OptimalError::DimensionTooSmall(d_max));
    }
    Ok((2..=d_max)
        .map(|d| FidelityRow {
            d,
            opt: analytic_fidelity(d),
            universal: universal_fidelity(d),
            phase_est: phase_estimation_fidelity(d),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{choi_from_kraus, is_cpt, is_phase_covariant, twirl};
    use crate::linalg::{frobenius_distance, hermitian_eigensystem};
    use crate::nsb::{canonical, random_nsb, MatchingPermutation};

    #[test]
    fn qubit_choi_and_kraus() {
        let b = canonical(2).unwrap();
        let k = optimal_kraus(&b);
        assert_eq!(k.len(), 1);
        let sx = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(k.operators()[0], sx);
        let r = optimal_choi(&b);
        assert_eq!(r, choi_from_kraus(&k));
    }

    #[test]
    fn qutrit_choi_spectrum() {
        let r = optimal_choi(&canonical(3).unwrap());
        let es = hermitian_eigensystem(r.matrix(), 1e-12).unwrap();
        // Three blocks of weight 1/2 on vectors of squared norm 2.
        for &v in &es.values[..3] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for &v in &es.values[3..] {
            assert!(v.abs() < 1e-12);
        }
        let k = optimal_kraus(&canonical(3).unwrap());
        assert_eq!(k.len(), 3);
        for (op, (i, j)) in k.operators().iter().zip([(1, 0), (2, 0), (2, 1)]) {
            let expected = pair_swap(i, j, 3).unwrap().scale_real(0.5f64.sqrt());
            assert!(frobenius_distance(op, &expected).unwrap() < 1e-15);
        }
    }

    #[test]
    fn choi_matches_kraus_form() {
        for d in 2..=6 {
            let b = random_nsb(d, 17).unwrap();
            let r = optimal_choi(&b);
            let from_kraus = choi_from_kraus(&optimal_kraus(&b));
            assert!(frobenius_distance(r.matrix(), from_kraus.matrix()).unwrap() < 1e-13);
            assert!(is_cpt(&r, 1e-10).passed());
            assert!(is_phase_covariant(&r, 1e-12, 10, 1));
            assert_eq!(twirl(&r), r);
        }
    }

    #[test]
    fn kraus_count_and_pruning() {
        let m = MatchingPermutation::new(6, &[(0, 5), (1, 4), (2, 3)]).unwrap();
        assert_eq!(optimal_kraus(&m.to_nsb()).len(), 3);
        assert_eq!(optimal_kraus(&canonical(5).unwrap()).len(), 10);
    }

    #[test]
    fn closed_form_constants() {
        assert_eq!(analytic_fidelity(2), 1.0);
        assert_eq!(analytic_fidelity(3), 2.0 / 3.0);
        assert_eq!(analytic_fidelity(4), 0.5);
        assert_eq!(universal_fidelity(2), 2.0 / 3.0);
        assert_eq!(universal_fidelity(3), 0.5);
        assert_eq!(phase_estimation_fidelity(2), 0.75);
        assert_eq!(phase_estimation_fidelity(3), 5.0 / 9.0);
        for d in 2..=64 {
            assert!(universal_fidelity(d) < analytic_fidelity(d));
            assert!(phase_estimation_fidelity(d) < analytic_fidelity(d));
        }
    }

    #[test]
    fn table_rows() {
        let t = fidelity_table(4).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].opt, 1.0);
        assert_eq!(t[2].opt, 0.5);
        assert_eq!(t[2].universal, 0.4);
        assert_eq!(t[2].phase_est, 7.0 / 16.0);
        assert!(fidelity_table(1).is_err());
    }

    #[test]
    fn choi_fidelity_is_linear() {
        let r = optimal_choi(&random_nsb(5, 2).unwrap());
        let f = choi_fidelity(&r);
        assert!((choi_fidelity(&r.scaled(3.0)) - 3.0 * f).abs() < 1e-14);
    }

    #[test]
    fn identity_channel_fidelities() {
        // Raw Tr[ψ₀⊗ψ₀ R] of |𝟙⟩⟩⟨⟨𝟙| is 1; the phase average is only 1/d.
        for d in 2..=4 {
            let id = KrausChannel::identity(d);
            let r = choi_from_kraus(&id);
            assert!((choi_fidelity(&r) - 1.0).abs() < 1e-14);
            assert!((choi_fidelity(&twirl(&r)) - 1.0 / d as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn pointwise_examples() {
        let q = optimal_kraus(&canonical(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pv = PhaseVector::random(2, &mut rng).unwrap();
            assert!((pointwise_fidelity(&q, &pv).unwrap() - 1.0).abs() < 1e-14);
        }
        let t = optimal_kraus(&canonical(3).unwrap());
        let f = pointwise_fidelity(&t, &PhaseVector::zeros(3).unwrap()).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-14);
        assert!(pointwise_fidelity(&t, &PhaseVector::zeros(2).unwrap()).is_err());
    }

    #[test]
    fn monte_carlo_single_sample_is_pointwise() {
        let ch = KrausChannel::identity(3);
        let (mean, stderr) = monte_carlo_fidelity(&ch, 1, 99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let pv = PhaseVector::random(3, &mut rng).unwrap();
        assert_eq!(mean, pointwise_fidelity(&ch, &pv).unwrap());
        assert_eq!(stderr, 0.0);
        assert!(matches!(
            monte_carlo_fidelity(&ch, 0, 1),
            Err(OptimalError::NoSamples)
        ));
    }

    #[test]
    fn report_fields() {
        let ch = optimal_kraus(&canonical(4).unwrap());
        let rep = fidelity_report(&ch, 5, 50, 3).unwrap();
        assert_eq!(rep.pointwise_samples.len(), 5);
        assert!(rep
            .pointwise_samples
            .iter()
            .all(|(_, f)| (f - 0.5).abs() < 1e-12));
        assert!((rep.monte_carlo_mean - 0.5).abs() < 1e-12);
        assert_eq!(rep.analytic, 0.5);
    }
}
