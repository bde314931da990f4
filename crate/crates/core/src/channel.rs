//! Channels in Kraus and Choi form.
//!
//! The Choi operator of a map `T` on `C^d` is `R = (T ⊗ I)|𝟙⟩⟩⟨⟨𝟙|` with
//! `|𝟙⟩⟩ = Σ_i |i⟩|i⟩`. Row index `i·d + k` of `R` means `|i⟩ ⊗ |k⟩` where
//! `i` is the output slot and `k` the reference slot, so trace preservation
//! reads `Tr_1[R] = I` and the map is recovered as
//! `T(ρ) = Tr_2[(I ⊗ ρᵀ) R]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::random::random_density_matrix;
use crate::linalg::{
    hermitian_eigensystem, kron, partial_trace, ComplexMatrix, LinalgError, Subsystem, ZERO,
};
use crate::states::{phase_unitary, PhaseVector, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("channel needs at least one Kraus operator")]
    NoOperators,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Kraus operators are not complete (deviation {deviation:.3e} > tol {tol:.3e})")]
    Incomplete { deviation: f64, tol: f64 },
    #[error("Choi operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("channel file must contain \"kraus\" or \"choi\"")]
    EmptyFile,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Choi operator `R` of a map on `C^d`; a `d² × d²` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiOperator {
    d: usize,
    matrix: ComplexMatrix,
}

impl ChoiOperator {
    pub fn new(d: usize, matrix: ComplexMatrix) -> Result<Self, ChannelError> {
        if d == 0 || matrix.shape() != (d * d, d * d) {
            return Err(ChannelError::DimensionMismatch(format!(
                "Choi operator for d = {d} must be {0}x{0}, got {1}x{2}",
                d * d,
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { d, matrix })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            d: self.d,
            matrix: self.matrix.scale_real(factor),
        }
    }
}

/// `ρ ↦ Σ_k K_k ρ K_k†` with `Σ_k K_k† K_k = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    d: usize,
    operators: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn new(operators: Vec<ComplexMatrix>, tol: f64) -> Result<Self, ChannelError> {
        let first = operators.first().ok_or(ChannelError::NoOperators)?;
        let d = first.rows();
        if let Some(k) = operators.iter().find(|k| k.shape() != (d, d)) {
            return Err(ChannelError::DimensionMismatch(format!(
                "Kraus operators must all be {d}x{d}, found {}x{}",
                k.rows(),
                k.cols()
            )));
        }
        let ch = Self { d, operators };
        let deviation = ch.completeness_deviation();
        if deviation > tol {
            return Err(ChannelError::Incomplete { deviation, tol });
        }
        Ok(ch)
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d,
            operators: vec![ComplexMatrix::identity(d)],
        }
    }

    /// `ρ ↦ UρU†`.
    pub fn unitary(u: ComplexMatrix, tol: f64) -> Result<Self, ChannelError> {
        Self::new(vec![u], tol)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// Max-entry deviation of `Σ K†K` from the identity.
    pub fn completeness_deviation(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.d, self.d);
        for k in &self.operators {
            sum = &sum + &(&k.adjoint() * k);
        }
        (&sum - &ComplexMatrix::identity(self.d)).max_abs()
    }
}

/// `R = Σ_k |K_k⟩⟩⟨⟨K_k|`, where `|K⟩⟩ = (K ⊗ I)|𝟙⟩⟩` is the row-major flattening of `K`.
pub fn choi_from_kraus(ch: &KrausChannel) -> ChoiOperator {
    let d = ch.d;
    let n = d * d;
    let mut r = ComplexMatrix::zeros(n, n);
    for k in &ch.operators {
        let v = k.as_slice();
        for x in 0..n {
            if v[x] == ZERO {
                continue;
            }
            for y in 0..n {
                r[(x, y)] += v[x] * v[y].conj();
            }
        }
    }
    ChoiOperator { d, matrix: r }
}

/// Kraus operators from the eigenpairs of `R` whose eigenvalue exceeds
/// `tol · λ_max`; each is `√λ · v` reshaped row-major into `d × d`.
pub fn kraus_from_choi(r: &ChoiOperator, tol: f64) -> Result<KrausChannel, ChannelError> {
    let es = hermitian_eigensystem(&r.matrix, tol)?;
    let lambda_max = es.max_eigenvalue();
    let scale = lambda_max.abs().max(1.0);
    if es.min_eigenvalue() < -tol * scale {
        return Err(ChannelError::NotPsd {
            min_eigenvalue: es.min_eigenvalue(),
        });
    }
    let d = r.d;
    let operators: Vec<ComplexMatrix> = es
        .values
        .iter()
        .enumerate()
        .take_while(|(_, &lambda)| lambda > tol * lambda_max)
        .map(|(k, &lambda)| {
            let v = es.vector(k);
            let s = lambda.sqrt();
            ComplexMatrix::from_fn(d, d, |a, i| v[a * d + i] * s)
        })
        .collect();
    if operators.is_empty() {
        return Err(ChannelError::NoOperators);
    }
    Ok(KrausChannel { d, operators })
}

fn check_input(d: usize, rho: &ComplexMatrix) -> Result<(), ChannelError> {
    if rho.shape() != (d, d) {
        return Err(ChannelError::DimensionMismatch(format!(
            "channel on d = {d} applied to a {}x{} matrix",
            rho.rows(),
            rho.cols()
        )));
    }
    Ok(())
}

/// `T(ρ) = Tr_2[(I ⊗ ρᵀ) R]`.
pub fn apply(r: &ChoiOperator, rho: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
    let d = r.d;
    check_input(d, rho)?;
    let lifted = kron(&ComplexMatrix::identity(d), &rho.transpose());
    let product = lifted.try_matmul(&r.matrix)?;
    Ok(partial_trace(&product, (d, d), Subsystem::Second)?)
}

/// `Σ_k K_k ρ K_k†`.
pub fn apply_kraus(ch: &KrausChannel, rho: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
    check_input(ch.d, rho)?;
    let mut out = ComplexMatrix::zeros(ch.d, ch.d);
    for k in &ch.operators {
        out = &out + &k.sandwich(rho)?;
    }
    Ok(out)
}

/// Complete positivity and trace preservation of a Choi operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CptReport {
    pub psd: bool,
    /// Smallest eigenvalue of the Hermitian part of `R`.
    pub min_eigenvalue: f64,
    pub trace_preserving: bool,
    /// Operator norm of `Tr_1[R] − I`.
    pub deviation: f64,
}

impl CptReport {
    pub fn passed(&self) -> bool {
        self.psd && self.trace_preserving
    }
}

pub fn is_cpt(r: &ChoiOperator, tol: f64) -> CptReport {
    let d = r.d;
    let hermitian = r.matrix.is_hermitian(tol);
    let min_eigenvalue = hermitian_eigensystem(&r.matrix.hermitian_part(), f64::INFINITY)
        .map(|es| es.min_eigenvalue())
        .unwrap_or(f64::NAN);
    let reduced = partial_trace(&r.matrix, (d, d), Subsystem::First)
        .expect("Choi shape checked on construction");
    let deviation = (&reduced - &ComplexMatrix::identity(d)).spectral_norm();
    CptReport {
        psd: hermitian && min_eigenvalue >= -tol,
        min_eigenvalue,
        trace_preserving: deviation <= tol,
        deviation,
    }
}

/// `U*(φ) ⊗ U*(φ)`, the representation under which covariant Choi operators are invariant.
pub fn conjugate_phase_square(pv: &PhaseVector) -> ComplexMatrix {
    let u = phase_unitary(pv).conjugate();
    kron(&u, &u)
}

/// Largest `‖[R, U*(φ)⊗U*(φ)]‖_F` over `n_samples` uniform random phase vectors.
pub fn covariance_deviation(r: &ChoiOperator, n_samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let pv = PhaseVector::random(r.d, &mut rng).expect("Choi dimension is at least 2");
        let g = conjugate_phase_square(&pv);
        let c = r.matrix.commutator(&g).expect("shapes match");
        worst = worst.max(c.frobenius_norm());
    }
    worst
}

/// Largest `‖T(UρU†) − U* T(ρ) Uᵀ‖_F` over `n_phases` random phase vectors,
/// each tried on `n_inputs` random density matrices.
pub fn channel_covariance_deviation(
    ch: &KrausChannel,
    n_phases: usize,
    n_inputs: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_phases {
        let pv = PhaseVector::random(ch.d, &mut rng).expect("channel dimension is at least 2");
        let u = phase_unitary(&pv);
        let u_bar = u.conjugate();
        for _ in 0..n_inputs {
            let rho = random_density_matrix(ch.d, &mut rng);
            let lhs = apply_kraus(ch, &u.sandwich(&rho).expect("square")).expect("shapes match");
            let rhs = u_bar
                .sandwich(&apply_kraus(ch, &rho).expect("shapes match"))
                .expect("square");
            worst = worst.max((&lhs - &rhs).frobenius_norm());
        }
    }
    worst
}

pub fn is_phase_covariant(r: &ChoiOperator, tol: f64, n_samples: usize, seed: u64) -> bool {
    r.d >= 2 && covariance_deviation(r, n_samples, seed) <= tol
}

/// Equivalence class of `|ik⟩` under the phase group: `{|ii⟩}` or `{|ik⟩, |ki⟩}`.
fn class_of(index: usize, d: usize) -> (usize, usize) {
    let (i, k) = (index / d, index % d);
    (i.min(k), i.max(k))
}

/// Projection onto the phase-covariant operators: keeps the entries of `R`
/// that connect basis vectors in the same class and zeroes the rest. This is
/// the exact group average of `(U*⊗U*)† R (U*⊗U*)`.
pub fn twirl(r: &ChoiOperator) -> ChoiOperator {
    let d = r.d;
    let n = d * d;
    let matrix = ComplexMatrix::from_fn(n, n, |x, y| {
        if class_of(x, d) == class_of(y, d) {
            r.matrix.get(x, y)
        } else {
            ZERO
        }
    });
    ChoiOperator { d, matrix }
}

/// Wire form of a channel: `{"d": d, "kraus": [matrix, ...]}` and/or `{"d": d, "choi": matrix}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<ComplexMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<ComplexMatrix>,
}

impl ChannelFile {
    /// Both representations of `ch`.
    pub fn from_kraus(ch: &KrausChannel) -> Self {
        Self {
            d: ch.d,
            kraus: Some(ch.operators.clone()),
            choi: Some(choi_from_kraus(ch).matrix),
        }
    }

    /// Kraus form, taken from `"kraus"` when present, otherwise extracted from `"choi"`.
    pub fn to_kraus(&self, tol: f64) -> Result<KrausChannel, ChannelError> {
        let ch = match (&self.kraus, &self.choi) {
            (Some(ops), _) => KrausChannel::new(ops.clone(), tol)?,
            (None, Some(m)) => kraus_from_choi(&ChoiOperator::new(self.d, m.clone())?, tol)?,
            (None, None) => return Err(ChannelError::EmptyFile),
        };
        if ch.d != self.d {
            return Err(ChannelError::DimensionMismatch(format!(
                "file declares d = {} but operators are {}x{}",
                self.d, ch.d, ch.d
            )));
        }
        Ok(ch)
    }

    pub fn to_choi(&self, tol: f64) -> Result<ChoiOperator, ChannelError> {
        match &self.choi {
            Some(m) => ChoiOperator::new(self.d, m.clone()),
            None => Ok(choi_from_kraus(&self.to_kraus(tol)?)),
        }
    }
}
