//! Equatorial states and the diagonal phase unitaries that generate them.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ComplexMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("dimension {d} needs {expected} phases, got {got}")]
    PhaseCount {
        d: usize,
        expected: usize,
        got: usize,
    },
    #[error("phase {index} is not finite")]
    NonFinitePhase { index: usize },
    #[error("cannot combine phase vectors of dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
}

fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Relative phases `φ_1, …, φ_{d−1}` in radians, reduced to `[0, 2π)`.
///
/// The phase of basis vector `|0⟩` is pinned to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhaseRepr", into = "PhaseRepr")]
pub struct PhaseVector {
    d: usize,
    phases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PhaseRepr {
    d: usize,
    phases: Vec<f64>,
}

impl TryFrom<PhaseRepr> for PhaseVector {
    type Error = StateError;

    fn try_from(repr: PhaseRepr) -> Result<Self, StateError> {
        PhaseVector::new(repr.d, repr.phases)
    }
}

impl From<PhaseVector> for PhaseRepr {
    fn from(pv: PhaseVector) -> Self {
        PhaseRepr {
            d: pv.d,
            phases: pv.phases,
        }
    }
}

impl PhaseVector {
    pub fn new(d: usize, phases: Vec<f64>) -> Result<Self, StateError> {
        if d < 2 {
            return Err(StateError::DimensionTooSmall(d));
        }
        if phases.len() != d - 1 {
            return Err(StateError::PhaseCount {
                d,
                expected: d - 1,
                got: phases.len(),
            });
        }
        if let Some(index) = phases.iter().position(|p| !p.is_finite()) {
            return Err(StateError::NonFinitePhase { index });
        }
        Ok(Self {
            d,
            phases: phases.into_iter().map(reduce_angle).collect(),
        })
    }

    pub fn zeros(d: usize) -> Result<Self, StateError> {
        Self::new(d, vec![0.0; d.saturating_sub(1)])
    }

    /// Uniform i.i.d. phases on `[0, 2π)`, the Haar measure on the phase torus.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self, StateError> {
        let phases = (1..d.max(1)).map(|_| rng.random::<f64>() * TAU).collect();
        Self::new(d, phases)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Phase of basis vector `k`, with `φ_0 = 0`.
    pub fn phase(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.phases[k - 1]
        }
    }

    /// `e^{iφ_k}` for `k = 0..d`.
    pub fn factors(&self) -> Vec<Complex64> {
        (0..self.d)
            .map(|k| Complex64::from_polar(1.0, self.phase(k)))
            .collect()
    }

    pub fn negated(&self) -> Self {
        Self {
            d: self.d,
            phases: self.phases.iter().map(|&p| reduce_angle(-p)).collect(),
        }
    }

    /// Group product in `U(1)^{d−1}`: phases add mod 2π.
    pub fn compose(&self, other: &Self) -> Result<Self, StateError> {
        if self.d != other.d {
            return Err(StateError::DimensionMismatch(self.d, other.d));
        }
        Ok(Self {
            d: self.d,
            phases: self
                .phases
                .iter()
                .zip(&other.phases)
                .map(|(a, b)| reduce_angle(a + b))
                .collect(),
        })
    }
}

/// Pure state whose amplitudes all have modulus `1/√d`, amplitude 0 real positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EquatorialState {
    amplitudes: Vec<Complex64>,
}

impl EquatorialState {
    pub fn d(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amplitudes, &self.amplitudes)
    }

    pub fn to_column(&self) -> ComplexMatrix {
        ComplexMatrix::column(&self.amplitudes)
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, rho: &ComplexMatrix) -> Complex64 {
        let n = self.d();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..n {
            for c in 0..n {
                acc += self.amplitudes[r].conj() * rho.get(r, c) * self.amplitudes[c];
            }
        }
        acc
    }
}

/// `|ψ₀⟩ = d^{−1/2} Σ_i |i⟩`.
pub fn seed_state(d: usize) -> Result<EquatorialState, StateError> {
    if d < 2 {
        return Err(StateError::DimensionTooSmall(d));
    }
    let a = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    Ok(EquatorialState {
        amplitudes: vec![a; d],
    })
}

/// `|ψ(φ)⟩` with amplitude `k` equal to `e^{iφ_k}/√d`.
pub fn equatorial_state(pv: &PhaseVector) -> EquatorialState {
    let norm = 1.0 / (pv.d() as f64).sqrt();
    EquatorialState {
        amplitudes: pv.factors().into_iter().map(|z| z * norm).collect(),
    }
}

/// `U(φ) = |0⟩⟨0| + Σ_j e^{iφ_j} |j⟩⟨j|`.
pub fn phase_unitary(pv: &PhaseVector) -> ComplexMatrix {
    ComplexMatrix::diagonal(&pv.factors())
}

/// The ideal time-reversed target `|ψ*(φ)⟩ = |ψ(−φ)⟩`.
pub fn conjugated_state(pv: &PhaseVector) -> EquatorialState {
    equatorial_state(&pv.negated())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_distance, inner};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn seed_state_values() {
        let s = seed_state(2).unwrap();
        for a in s.amplitudes() {
            assert!(close(*a, Complex64::new(FRAC_1_SQRT_2, 0.0), 1e-15));
        }
        let s = seed_state(4).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| *a == Complex64::new(0.5, 0.0)));
        for d in 2..=8 {
            let s = seed_state(d).unwrap();
            let n = inner(s.amplitudes(), s.amplitudes());
            assert!(close(n, Complex64::new(1.0, 0.0), 1e-14));
        }
        assert_eq!(seed_state(1), Err(StateError::DimensionTooSmall(1)));
    }

    #[test]
    fn equatorial_examples() {
        let zero = PhaseVector::zeros(5).unwrap();
        assert_eq!(equatorial_state(&zero), seed_state(5).unwrap());

        let pv = PhaseVector::new(2, vec![PI]).unwrap();
        let s = equatorial_state(&pv);
        assert!(close(
            s.amplitudes()[1],
            Complex64::new(-FRAC_1_SQRT_2, 0.0),
            1e-15
        ));

        let pv = PhaseVector::new(3, vec![FRAC_PI_2, PI]).unwrap();
        let s = equatorial_state(&pv);
        let r = 1.0 / 3f64.sqrt();
        let expected = [
            Complex64::new(r, 0.0),
            Complex64::new(0.0, r),
            Complex64::new(-r, 0.0),
        ];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!(close(*a, e, 1e-15));
        }
    }

    #[test]
    fn conjugated_examples() {
        let zero = PhaseVector::zeros(3).unwrap();
        assert_eq!(conjugated_state(&zero), seed_state(3).unwrap());
        let pv = PhaseVector::new(2, vec![FRAC_PI_2]).unwrap();
        let s = conjugated_state(&pv);
        assert!(close(
            s.amplitudes()[1],
            Complex64::new(0.0, -FRAC_1_SQRT_2),
            1e-15
        ));
    }

    #[test]
    fn phases_reduced_on_construction() {
        let pv = PhaseVector::new(3, vec![-FRAC_PI_2, 5.0 * PI]).unwrap();
        assert!((pv.phases()[0] - 1.5 * PI).abs() < 1e-14);
        assert!((pv.phases()[1] - PI).abs() < 1e-14);
        let tiny = PhaseVector::new(2, vec![-1e-300]).unwrap();
        assert!(tiny.phases()[0] < TAU);
        assert!(PhaseVector::new(3, vec![0.0]).is_err());
        assert!(PhaseVector::new(2, vec![f64::NAN]).is_err());
    }

    #[test]
    fn phase_unitary_basics() {
        assert_eq!(
            phase_unitary(&PhaseVector::zeros(4).unwrap()),
            ComplexMatrix::identity(4)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in 2..=8 {
            let pv = PhaseVector::random(d, &mut rng).unwrap();
            let u = phase_unitary(&pv);
            assert!(u.is_unitary(1e-14));
            let via_u = &u * &seed_state(d).unwrap().to_column();
            let direct = equatorial_state(&pv).to_column();
            assert!(frobenius_distance(&via_u, &direct).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn json_schema() {
        let pv: PhaseVector = serde_json::from_str(r#"{"d": 3, "phases": [0.5, 7.0]}"#).unwrap();
        assert_eq!(pv.d(), 3);
        assert!((pv.phases()[1] - (7.0 - TAU)).abs() < 1e-15);
        assert!(serde_json::from_str::<PhaseVector>(r#"{"d": 3, "phases": [0.5]}"#).is_err());
    }
}
