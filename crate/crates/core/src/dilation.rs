//! Unitary realizations of the optimal channels.
//!
//! For even `d`, a perfect matching with pair operators `S_0, …, S_{n−1}`
//! (`n = d/2`, `S_r = T_{ij}` for the `r`-th pair) is realized on
//! `C^d ⊗ C^n` by the circulant block unitary
//!
//! ```text
//! U = Σ_{i,j} S_{(i+j) mod n} ⊗ |i⟩⟨j|
//! ```
//!
//! which is unitary because distinct `S_r` have disjoint supports and
//! `Σ_r S_r² = I`. Mixing matchings is done with a control register:
//! `U = Σ_k U_k ⊗ |k⟩⟨k|`, and the diagonal of the control state sets the
//! weights. Odd `d` falls back to a Stinespring dilation built from the Kraus
//! operators.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{apply_kraus, choi_from_kraus, ChannelError, ChoiOperator, KrausChannel};
use crate::linalg::random::random_density_matrix;
use crate::linalg::{
    frobenius_distance, inner, kron, partial_trace, ComplexMatrix, LinalgError, Subsystem, ONE,
    ZERO,
};
use crate::nsb::{matchings, MatchingPermutation, NsbError, NsbMatrix};

/// Unitarity and state-validity tolerance for dilations.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DilationError {
    #[error("pair ({i}, {j}) invalid for d = {d}: need 0 <= j < i < d")]
    PairIndex { i: usize, j: usize, d: usize },
    #[error("minimal dilations need an even dimension, got {0}")]
    OddDimension(usize),
    #[error("formula index k = {k} out of range 1..={max}")]
    FormulaIndex { k: usize, max: usize },
    #[error("unitary deviates from unitarity by {0:.3e}")]
    NotUnitary(f64),
    #[error("{which} state is not a density matrix")]
    BadState { which: &'static str },
    #[error("weights must be a probability distribution of length {expected}: {reason}")]
    BadWeights { expected: usize, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Nsb(#[from] NsbError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `T_ij = |i⟩⟨j| + |j⟩⟨i|` for `0 ≤ j < i < d`.
pub fn pair_swap(i: usize, j: usize, d: usize) -> Result<ComplexMatrix, DilationError> {
    if !(j < i && i < d) {
        return Err(DilationError::PairIndex { i, j, d });
    }
    Ok(swap_unchecked(i, j, d))
}

fn swap_unchecked(i: usize, j: usize, d: usize) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(d, d);
    t[(i, j)] += ONE;
    t[(j, i)] += ONE;
    t
}

/// A unitary on system ⊗ ancilla (⊗ control) plus the fixed environment
/// states; the channel is `ρ ↦ Tr_env[U (ρ ⊗ σ_a ⊗ σ_b) U†]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationSpec {
    pub d: usize,
    pub ancilla_dim: usize,
    /// 0 when there is no control register.
    pub control_dim: usize,
    pub unitary: ComplexMatrix,
    pub ancilla_state: ComplexMatrix,
    pub control_state: Option<ComplexMatrix>,
}

fn is_density(m: &ComplexMatrix, n: usize, tol: f64) -> bool {
    m.shape() == (n, n) && (m.trace() - ONE).norm() <= tol && m.is_psd(tol)
}

impl DilationSpec {
    pub fn new(
        d: usize,
        ancilla_dim: usize,
        unitary: ComplexMatrix,
        ancilla_state: ComplexMatrix,
        control: Option<(usize, ComplexMatrix)>,
    ) -> Result<Self, DilationError> {
        let (control_dim, control_state) = match control {
            Some((n, s)) => (n, Some(s)),
            None => (0, None),
        };
        let spec = Self {
            d,
            ancilla_dim,
            control_dim,
            unitary,
            ancilla_state,
            control_state,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Dimension of ancilla ⊗ control.
    pub fn env_dim(&self) -> usize {
        self.ancilla_dim * self.control_dim.max(1)
    }

    pub fn total_dim(&self) -> usize {
        self.d * self.env_dim()
    }

    pub fn validate(&self) -> Result<(), DilationError> {
        let n = self.total_dim();
        if self.unitary.shape() != (n, n) {
            return Err(DilationError::DimensionMismatch(format!(
                "unitary must be {n}x{n}, got {}x{}",
                self.unitary.rows(),
                self.unitary.cols()
            )));
        }
        let dev = self.unitary.unitarity_deviation();
        if dev > UNITARY_TOL {
            return Err(DilationError::NotUnitary(dev));
        }
        if !is_density(&self.ancilla_state, self.ancilla_dim, UNITARY_TOL) {
            return Err(DilationError::BadState { which: "ancilla" });
        }
        match (&self.control_state, self.control_dim) {
            (None, 0) => {}
            (Some(s), n) if n > 0 && is_density(s, n, UNITARY_TOL) => {}
            _ => return Err(DilationError::BadState { which: "control" }),
        }
        Ok(())
    }

    /// `σ_a ⊗ σ_b`, or just `σ_a` without a control register.
    pub fn environment_state(&self) -> ComplexMatrix {
        match &self.control_state {
            Some(c) => kron(&self.ancilla_state, c),
            None => self.ancilla_state.clone(),
        }
    }

    /// `Tr_env[U (ρ ⊗ σ_env) U†]`, expanded over the blocks
    /// `B_{m,e} = (I ⊗ ⟨m|) U (I ⊗ |e⟩)` as `Σ_{e,f} σ_ef Σ_m B_{me} ρ B_{mf}†`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix, DilationError> {
        let d = self.d;
        if rho.shape() != (d, d) {
            return Err(DilationError::DimensionMismatch(format!(
                "dilation on d = {d} applied to a {}x{} matrix",
                rho.rows(),
                rho.cols()
            )));
        }
        let env = self.environment_state();
        let e_dim = self.env_dim();
        let block = |m: usize, e: usize| {
            ComplexMatrix::from_fn(d, d, |a, i| self.unitary.get(a * e_dim + m, i * e_dim + e))
        };
        let mut out = ComplexMatrix::zeros(d, d);
        for e in 0..e_dim {
            for f in 0..e_dim {
                let w = env.get(e, f);
                if w == ZERO {
                    continue;
                }
                for m in 0..e_dim {
                    let left = block(m, e);
                    let right = block(m, f);
                    let term = &(&left * rho) * &right.adjoint();
                    out = &out + &term.scale(w);
                }
            }
        }
        Ok(out)
    }

    /// Direct evaluation: build `ρ ⊗ σ_env`, conjugate by `U`, trace out the environment.
    pub fn apply_dense(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix, DilationError> {
        let joint = kron(rho, &self.environment_state());
        let evolved = self.unitary.sandwich(&joint)?;
        Ok(partial_trace(
            &evolved,
            (self.d, self.env_dim()),
            Subsystem::Second,
        )?)
    }

    /// Choi operator of the realized channel, `Σ_ij T(|i⟩⟨j|) ⊗ |i⟩⟨j|`.
    pub fn choi(&self) -> Result<ChoiOperator, DilationError> {
        let d = self.d;
        let mut r = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let out = self.apply(&ComplexMatrix::basis_op(d, i, j))?;
                for a in 0..d {
                    for b in 0..d {
                        r[(a * d + i, b * d + j)] = out.get(a, b);
                    }
                }
            }
        }
        Ok(ChoiOperator::new(d, r)?)
    }
}

/// `|0⟩⟨0|` in dimension `n`.
fn ground_state(n: usize) -> ComplexMatrix {
    ComplexMatrix::basis_op(n, 0, 0)
}

/// Circulant block unitary `Σ_{i,j} S_{(i+j) mod n} ⊗ |i⟩⟨j|` for pair
/// operators `S_r = T_{pairs[r]}`, in the given order.
///
/// The pairs must form a perfect matching of `{0, …, d−1}`.
pub fn circulant_unitary(
    d: usize,
    pairs: &[(usize, usize)],
) -> Result<ComplexMatrix, DilationError> {
    MatchingPermutation::new(d, pairs)?;
    let n = pairs.len();
    let ops: Vec<ComplexMatrix> = pairs
        .iter()
        .map(|&(a, b)| swap_unchecked(a.max(b), a.min(b), d))
        .collect();
    let mut u = ComplexMatrix::zeros(d * n, d * n);
    for i in 0..n {
        for j in 0..n {
            u = &u + &kron(&ops[(i + j) % n], &ComplexMatrix::basis_op(n, i, j));
        }
    }
    Ok(u)
}

/// Minimal dilation of the extremal channel of a matching: ancilla dimension `d/2`,
/// ancilla state `|0⟩⟨0|`, pairs in the matching's stored order.
pub fn matching_unitary(m: &MatchingPermutation) -> Result<DilationSpec, DilationError> {
    let d = m.d();
    let u = circulant_unitary(d, m.pairs())?;
    DilationSpec::new(d, d / 2, u, ground_state(d / 2), None)
}

/// The general even-`d` formula taken literally, with `⊕` read as addition mod `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulaUnitary {
    pub d: usize,
    pub k: usize,
    pub matrix: ComplexMatrix,
    /// Max-entry deviation of `U†U` from the identity.
    pub deviation: f64,
    pub unitary: bool,
}

/// `U_k = Σ_{i,j=0}^{d/2−1} T_{k⊕2i⊕2j, 2i⊕2j} ⊗ |i⟩⟨j|`, with a unitarity
/// report. Nothing here guarantees the result is unitary.
pub fn paper_formula_unitary(d: usize, k: usize) -> Result<FormulaUnitary, DilationError> {
    if d == 0 || d % 2 == 1 {
        return Err(DilationError::OddDimension(d));
    }
    if !(1..d).contains(&k) {
        return Err(DilationError::FormulaIndex { k, max: d - 1 });
    }
    let n = d / 2;
    let mut u = ComplexMatrix::zeros(d * n, d * n);
    for i in 0..n {
        for j in 0..n {
            let low = (2 * i + 2 * j) % d;
            let high = (k + low) % d;
            u = &u
                + &kron(
                    &swap_unchecked(high, low, d),
                    &ComplexMatrix::basis_op(n, i, j),
                );
        }
    }
    let deviation = u.unitarity_deviation();
    Ok(FormulaUnitary {
        d,
        k,
        matrix: u,
        deviation,
        unitary: deviation <= UNITARY_TOL,
    })
}

/// `Σ_{(i,j) ∈ m} T_ij ρ T_ij`.
pub fn extremal_channel(
    m: &MatchingPermutation,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix, DilationError> {
    let d = m.d();
    if rho.shape() != (d, d) {
        return Err(DilationError::DimensionMismatch(format!(
            "matching on d = {d} applied to a {}x{} matrix",
            rho.rows(),
            rho.cols()
        )));
    }
    let mut out = ComplexMatrix::zeros(d, d);
    for &(i, j) in m.pairs() {
        out = &out + &swap_unchecked(i, j, d).sandwich(rho)?;
    }
    Ok(out)
}

/// The `d − 1` matchings addressed by the control register, level `k = 1..d−1`
/// at control index `k − 1`.
///
/// Odd `k`: the matching `{(2r, 2r + k mod d)}`, which is what the general
/// formula produces at odd `k`. Even `k`: the lexicographically first matching
/// not already assigned. At `d = 4` this yields `{01,23}`, `{02,13}`, `{03,12}`.
pub fn control_matchings(d: usize) -> Result<Vec<MatchingPermutation>, DilationError> {
    if d == 0 || d % 2 == 1 {
        return Err(DilationError::OddDimension(d));
    }
    let mut levels: Vec<Option<MatchingPermutation>> = vec![None; d - 1];
    for k in (1..d).step_by(2) {
        let pairs: Vec<(usize, usize)> = (0..d / 2).map(|r| (2 * r, (2 * r + k) % d)).collect();
        levels[k - 1] = Some(MatchingPermutation::new(d, &pairs)?);
    }
    let all = matchings(d)?;
    for k in (2..d).step_by(2) {
        let pick = all
            .iter()
            .find(|m| !levels.iter().flatten().any(|used| used == *m))
            .expect("(d−1)!! ≥ d − 1 matchings available")
            .clone();
        levels[k - 1] = Some(pick);
    }
    Ok(levels
        .into_iter()
        .map(|m| m.expect("every level assigned"))
        .collect())
}

/// `U = Σ_k U_k ⊗ |k⟩⟨k|` on system ⊗ ancilla ⊗ control (dims `d`, `d/2`, `d − 1`).
#[derive(Debug, Clone)]
pub struct ControlledUnitary {
    pub d: usize,
    pub matchings: Vec<MatchingPermutation>,
    pub unitary: ComplexMatrix,
}

pub fn controlled_unitary(d: usize) -> Result<ControlledUnitary, DilationError> {
    let ms = control_matchings(d)?;
    let levels = ms.len();
    let n = d / 2;
    let mut u = ComplexMatrix::zeros(d * n * levels, d * n * levels);
    for (k, m) in ms.iter().enumerate() {
        let uk = circulant_unitary(d, m.pairs())?;
        u = &u + &kron(&uk, &ComplexMatrix::basis_op(levels, k, k));
    }
    Ok(ControlledUnitary {
        d,
        matchings: ms,
        unitary: u,
    })
}

impl ControlledUnitary {
    pub fn control_dim(&self) -> usize {
        self.matchings.len()
    }

    /// Dilation with ancilla `|0⟩⟨0|` and the given control density matrix.
    pub fn with_control_state(&self, sigma: ComplexMatrix) -> Result<DilationSpec, DilationError> {
        let n = self.d / 2;
        DilationSpec::new(
            self.d,
            n,
            self.unitary.clone(),
            ground_state(n),
            Some((self.control_dim(), sigma)),
        )
    }

    /// Dilation with control state `diag(weights)`.
    pub fn with_weights(&self, weights: &[f64]) -> Result<DilationSpec, DilationError> {
        self.check_weights(weights)?;
        let diag: Vec<Complex64> = weights.iter().map(|&w| Complex64::new(w, 0.0)).collect();
        self.with_control_state(ComplexMatrix::diagonal(&diag))
    }

    /// `Σ_k w_k P^{(k)}`, the NSB matrix of the channel selected by `weights`.
    pub fn target_nsb(&self, weights: &[f64]) -> Result<NsbMatrix, DilationError> {
        self.check_weights(weights)?;
        let ps: Vec<NsbMatrix> = self
            .matchings
            .iter()
            .map(MatchingPermutation::to_nsb)
            .collect();
        let parts: Vec<(f64, &NsbMatrix)> = weights.iter().copied().zip(&ps).collect();
        Ok(NsbMatrix::convex_combination(&parts)?)
    }

    fn check_weights(&self, weights: &[f64]) -> Result<(), DilationError> {
        let expected = self.control_dim();
        let bad = |reason: String| DilationError::BadWeights { expected, reason };
        if weights.len() != expected {
            return Err(bad(format!("got {} weights", weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(bad(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(bad(format!("weights sum to {total}")));
        }
        Ok(())
    }
}

/// Whether the matching unitary with ancilla state `α|0⟩⟨0| + β|1⟩⟨1|`
/// still realizes the extremal channel on random inputs, within `1e-11`.
pub fn mixed_ancilla_check(
    m: &MatchingPermutation,
    alpha: f64,
    beta: f64,
) -> Result<bool, DilationError> {
    let d = m.d();
    let n = d / 2;
    if n < 2 {
        return Err(DilationError::DimensionMismatch(
            "mixed ancilla needs an ancilla of dimension at least 2".into(),
        ));
    }
    if alpha < 0.0 || beta < 0.0 || ((alpha + beta) - 1.0).abs() > 1e-12 {
        return Err(DilationError::BadWeights {
            expected: 2,
            reason: format!("alpha = {alpha}, beta = {beta}"),
        });
    }
    let mut spec = matching_unitary(m)?;
    let mut diag = vec![ZERO; n];
    diag[0] = alpha.into();
    diag[1] = beta.into();
    spec.ancilla_state = ComplexMatrix::diagonal(&diag);
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..10 {
        let rho = random_density_matrix(d, &mut rng);
        let got = spec.apply(&rho)?;
        let want = extremal_channel(m, &rho)?;
        if frobenius_distance(&got, &want)? > 1e-11 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Stinespring dilation with one ancilla level per Kraus operator.
///
/// The isometry `|ψ⟩ ⊗ |0⟩ ↦ Σ_k K_k|ψ⟩ ⊗ |k⟩` fills the columns for
/// ancilla input `|0⟩`; the remaining columns are an orthonormal completion.
pub fn generic_stinespring(ch: &KrausChannel) -> Result<DilationSpec, DilationError> {
    let dev = ch.completeness_deviation();
    if dev > 1e-9 {
        return Err(ChannelError::Incomplete {
            deviation: dev,
            tol: 1e-9,
        }
        .into());
    }
    let d = ch.d();
    let n = ch.len();
    let total = d * n;
    let isometry: Vec<Vec<Complex64>> = (0..d)
        .map(|i| {
            let mut col = vec![ZERO; total];
            for (k, op) in ch.operators().iter().enumerate() {
                for a in 0..d {
                    col[a * n + k] = op.get(a, i);
                }
            }
            col
        })
        .collect();

    let mut basis: Vec<Vec<Complex64>> = isometry.clone();
    for e in 0..total {
        if basis.len() == total {
            break;
        }
        let mut v = vec![ZERO; total];
        v[e] = ONE;
        // two passes of Gram–Schmidt
        for _ in 0..2 {
            for u in &basis {
                let p = inner(u, &v);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
            }
        }
        let norm = inner(&v, &v).re.sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }

    let mut columns: Vec<Option<&Vec<Complex64>>> = vec![None; total];
    for (i, col) in basis[..d].iter().enumerate() {
        columns[i * n] = Some(col);
    }
    let mut rest = basis[d..].iter();
    for slot in columns.iter_mut().filter(|c| c.is_none()) {
        *slot = rest.next();
    }
    let u = ComplexMatrix::from_fn(total, total, |r, c| {
        columns[c].expect("completion fills every column")[r]
    });
    DilationSpec::new(d, n, u, ground_state(n), None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilationReport {
    pub n_random: usize,
    pub max_distance: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compare the traced-out evolution with `apply_kraus` on random density matrices.
pub fn verify_dilation(
    spec: &DilationSpec,
    ch: &KrausChannel,
    n_random: usize,
    seed: u64,
    tol: f64,
) -> Result<DilationReport, DilationError> {
    if spec.d != ch.d() {
        return Err(DilationError::DimensionMismatch(format!(
            "dilation on d = {} vs channel on d = {}",
            spec.d,
            ch.d()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_distance: f64 = 0.0;
    for _ in 0..n_random {
        let rho = random_density_matrix(spec.d, &mut rng);
        let got = spec.apply_dense(&rho)?;
        let want = apply_kraus(ch, &rho)?;
        max_distance = max_distance.max(frobenius_distance(&got, &want)?);
    }
    Ok(DilationReport {
        n_random,
        max_distance,
        tol,
        pass: max_distance <= tol,
    })
}

/// Choi operator of the Kraus channel for the matching.
pub fn extremal_choi(m: &MatchingPermutation) -> ChoiOperator {
    choi_from_kraus(&crate::optimal::optimal_kraus(&m.to_nsb()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nsb::family_d4;
    use crate::optimal::{optimal_choi, optimal_kraus};

    fn m(d: usize, pairs: &[(usize, usize)]) -> MatchingPermutation {
        MatchingPermutation::new(d, pairs).unwrap()
    }

    /// `[[T_a, T_b], [T_b, T_a]]` over a qubit ancilla, system ⊗ ancilla order.
    fn reference_block(a: (usize, usize), b: (usize, usize)) -> ComplexMatrix {
        let ta = pair_swap(a.0, a.1, 4).unwrap();
        let tb = pair_swap(b.0, b.1, 4).unwrap();
        let e = |i, j| ComplexMatrix::basis_op(2, i, j);
        let mut u = kron(&ta, &e(0, 0));
        u = &u + &kron(&tb, &e(0, 1));
        u = &u + &kron(&tb, &e(1, 0));
        &u + &kron(&ta, &e(1, 1))
    }

    #[test]
    fn pair_swap_properties() {
        let sx = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(pair_swap(1, 0, 2).unwrap(), sx);
        let t = pair_swap(3, 2, 4).unwrap();
        let proj = &ComplexMatrix::basis_op(4, 2, 2) + &ComplexMatrix::basis_op(4, 3, 3);
        assert_eq!(&t * &t, proj);
        let product = &pair_swap(1, 0, 4).unwrap() * &t;
        assert_eq!(product, ComplexMatrix::zeros(4, 4));
        assert!(pair_swap(0, 1, 4).is_err());
        assert!(pair_swap(4, 1, 4).is_err());
    }

    #[test]
    fn matching_unitaries_reproduce_the_d4_blocks() {
        let u1 = matching_unitary(&m(4, &[(0, 1), (2, 3)])).unwrap();
        assert_eq!(u1.unitary, reference_block((1, 0), (3, 2)));
        assert_eq!(u1.ancilla_dim, 2);
        let u2 = matching_unitary(&m(4, &[(0, 2), (1, 3)])).unwrap();
        assert_eq!(u2.unitary, reference_block((2, 0), (3, 1)));
        let u3 = matching_unitary(&m(4, &[(0, 3), (1, 2)])).unwrap();
        assert_eq!(u3.unitary, reference_block((3, 0), (2, 1)));
    }

    #[test]
    fn qubit_matching_unitary_is_sigma_x() {
        let spec = matching_unitary(&m(2, &[(0, 1)])).unwrap();
        assert_eq!(spec.ancilla_dim, 1);
        assert_eq!(spec.unitary, pair_swap(1, 0, 2).unwrap());
    }

    #[test]
    fn d6_matching_unitary_shape() {
        let spec = matching_unitary(&m(6, &[(0, 4), (1, 3), (2, 5)])).unwrap();
        assert_eq!(spec.unitary.shape(), (18, 18));
        assert!(spec.unitary.unitarity_deviation() <= 1e-12);
    }

    #[test]
    fn formula_at_d4() {
        let f1 = paper_formula_unitary(4, 1).unwrap();
        assert!(f1.unitary);
        assert_eq!(f1.matrix, reference_block((1, 0), (3, 2)));
        let f3 = paper_formula_unitary(4, 3).unwrap();
        assert!(f3.unitary);
        assert_eq!(f3.matrix, reference_block((3, 0), (2, 1)));
        let f2 = paper_formula_unitary(4, 2).unwrap();
        assert!(!f2.unitary);
        assert_eq!(f2.matrix, reference_block((2, 0), (2, 0)));
        assert!(paper_formula_unitary(4, 4).is_err());
        assert!(paper_formula_unitary(5, 1).is_err());
    }

    #[test]
    fn formula_equals_circulant_at_odd_k() {
        for d in [2usize, 4, 6, 8] {
            for k in (1..d).step_by(2) {
                let pairs: Vec<(usize, usize)> =
                    (0..d / 2).map(|r| ((k + 2 * r) % d, 2 * r)).collect();
                let f = paper_formula_unitary(d, k).unwrap();
                assert_eq!(
                    f.matrix,
                    circulant_unitary(d, &pairs).unwrap(),
                    "d={d} k={k}"
                );
                assert!(f.unitary);
            }
            for k in (2..d).step_by(2) {
                assert!(!paper_formula_unitary(d, k).unwrap().unitary);
            }
        }
    }

    #[test]
    fn extremal_channel_matches_dilation_and_kraus() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for mm in matchings(4).unwrap() {
            let spec = matching_unitary(&mm).unwrap();
            let kraus = optimal_kraus(&mm.to_nsb());
            let rho = random_density_matrix(4, &mut rng);
            let a = extremal_channel(&mm, &rho).unwrap();
            let b = spec.apply(&rho).unwrap();
            let c = spec.apply_dense(&rho).unwrap();
            let k = apply_kraus(&kraus, &rho).unwrap();
            assert!(frobenius_distance(&a, &b).unwrap() < 1e-12);
            assert!(frobenius_distance(&a, &c).unwrap() < 1e-12);
            assert!(frobenius_distance(&a, &k).unwrap() < 1e-12);
        }
        let sx = pair_swap(1, 0, 2).unwrap();
        let rho = random_density_matrix(2, &mut rng);
        let out = extremal_channel(&m(2, &[(0, 1)]), &rho).unwrap();
        assert!(frobenius_distance(&out, &sx.sandwich(&rho).unwrap()).unwrap() < 1e-15);
    }

    #[test]
    fn control_matchings_selection() {
        let ms = control_matchings(4).unwrap();
        assert_eq!(ms, matchings(4).unwrap());
        for d in [2usize, 6, 8] {
            let ms = control_matchings(d).unwrap();
            assert_eq!(ms.len(), d - 1);
            for (a, x) in ms.iter().enumerate() {
                for y in &ms[a + 1..] {
                    assert_ne!(x, y);
                }
            }
        }
        assert!(control_matchings(5).is_err());
    }

    #[test]
    fn controlled_dilation_follows_control_diagonal() {
        let cu = controlled_unitary(4).unwrap();
        assert!(cu.unitary.is_unitary(1e-12));
        let pure0 = cu.with_weights(&[1.0, 0.0, 0.0]).unwrap();
        let target = extremal_choi(&cu.matchings[0]);
        assert!(
            frobenius_distance(pure0.choi().unwrap().matrix(), target.matrix()).unwrap() < 1e-12
        );

        let spec = cu.with_weights(&[0.2, 0.3, 0.5]).unwrap();
        let want = optimal_choi(&family_d4(0.2, 0.3).unwrap());
        assert!(frobenius_distance(spec.choi().unwrap().matrix(), want.matrix()).unwrap() < 1e-11);

        let amp = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
        let sup = ComplexMatrix::outer(&[amp; 3], &[amp; 3]);
        let coherent = cu.with_control_state(sup).unwrap();
        let third = 1.0 / 3.0;
        let mixed = cu.with_weights(&[third, third, third]).unwrap();
        let dist = frobenius_distance(
            coherent.choi().unwrap().matrix(),
            mixed.choi().unwrap().matrix(),
        );
        assert!(dist.unwrap() < 1e-11);
    }

    #[test]
    fn controlled_rejects_bad_weights() {
        let cu = controlled_unitary(4).unwrap();
        assert!(cu.with_weights(&[0.5, 0.5]).is_err());
        assert!(cu.with_weights(&[0.5, 0.6, -0.1]).is_err());
        assert!(cu.with_weights(&[0.5, 0.4, 0.0]).is_err());
        assert!(controlled_unitary(3).is_err());
    }

    #[test]
    fn mixed_ancilla_cases() {
        let p1 = m(4, &[(0, 1), (2, 3)]);
        for (a, b) in [(1.0, 0.0), (0.5, 0.5), (0.0, 1.0), (0.3, 0.7)] {
            assert!(mixed_ancilla_check(&p1, a, b).unwrap());
        }
        assert!(mixed_ancilla_check(&p1, 0.5, 0.6).is_err());
        assert!(mixed_ancilla_check(&m(2, &[(0, 1)]), 1.0, 0.0).is_err());
    }

    #[test]
    fn generic_dilation_reproduces_channels() {
        let q = optimal_kraus(&crate::nsb::canonical(3).unwrap());
        let spec = generic_stinespring(&q).unwrap();
        assert_eq!(spec.ancilla_dim, 3);
        let rep = verify_dilation(&spec, &q, 10, 1, 1e-11).unwrap();
        assert!(rep.pass, "{rep:?}");

        let sx = pair_swap(1, 0, 2).unwrap();
        let ch = KrausChannel::unitary(sx.clone(), 1e-12).unwrap();
        let spec = generic_stinespring(&ch).unwrap();
        assert_eq!(spec.ancilla_dim, 1);
        assert_eq!(spec.unitary, sx);

        let c4 = optimal_kraus(&crate::nsb::canonical(4).unwrap());
        let spec = generic_stinespring(&c4).unwrap();
        assert_eq!(spec.ancilla_dim, 6);
        assert!(verify_dilation(&spec, &c4, 10, 2, 1e-11).unwrap().pass);
    }

    #[test]
    fn corrupted_unitary_fails_verification() {
        let mm = m(4, &[(0, 1), (2, 3)]);
        let mut spec = matching_unitary(&mm).unwrap();
        let kraus = optimal_kraus(&mm.to_nsb());
        assert!(verify_dilation(&spec, &kraus, 5, 3, 1e-10).unwrap().pass);
        for a in 0..4 {
            for i in 0..4 {
                spec.unitary[(a * 2 + 1, i * 2)] = ZERO;
            }
        }
        assert!(spec.validate().is_err());
        assert!(!verify_dilation(&spec, &kraus, 5, 3, 1e-10).unwrap().pass);
    }

    #[test]
    fn spec_json_round_trip() {
        let cu = controlled_unitary(4).unwrap();
        let spec = cu.with_weights(&[0.2, 0.3, 0.5]).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: DilationSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "d",
            "ancilla_dim",
            "control_dim",
            "unitary",
            "ancilla_state",
            "control_state",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let plain = matching_unitary(&m(2, &[(0, 1)])).unwrap();
        let v = serde_json::to_value(&plain).unwrap();
        assert!(v["control_state"].is_null());
    }
}
