//! Cyclic complex Jacobi eigensolver for small Hermitian matrices.

use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError, ONE, ZERO};

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Real eigenvalues, sorted descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl Eigensystem {
    pub fn min_eigenvalue(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.rows())
            .map(|r| self.vectors.get(r, k))
            .collect()
    }

    /// `V·diag(λ)·V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        ComplexMatrix::from_fn(n, n, |r, c| {
            (0..n)
                .map(|k| self.vectors.get(r, k) * self.values[k] * self.vectors.get(c, k).conj())
                .sum()
        })
    }
}

fn off_diagonal_norm_sqr(a: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += a[r * n + c].norm_sqr();
            }
        }
    }
    s
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Fails with [`LinalgError::NotHermitian`] when `m` deviates from its
/// adjoint by more than `tol` in any entry; otherwise the Hermitian part of
/// `m` is diagonalized.
pub fn hermitian_eigensystem(m: &ComplexMatrix, tol: f64) -> Result<Eigensystem, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigensystem of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let deviation = m.hermiticity_deviation();
    if deviation > tol {
        return Err(LinalgError::NotHermitian { deviation, tol });
    }
    let n = m.rows();
    let mut a: Vec<Complex64> = m.hermitian_part().as_slice().to_vec();
    let mut v: Vec<Complex64> = ComplexMatrix::identity(n).as_slice().to_vec();

    let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let threshold = (f64::EPSILON * f64::EPSILON) * total.max(f64::MIN_POSITIVE);

    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm_sqr(&a, n) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm_sqr(&a, n) > threshold {
        return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y * n + y].re.total_cmp(&a[x * n + x].re));
    let values = order.iter().map(|&k| a[k * n + k].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(Eigensystem { values, vectors })
}

/// Annihilate `a[p][q]` with the unitary `J = W·G`, where `W = diag(1, e^{-iα})`
/// makes the pivot real and `G` is the real Jacobi rotation. Updates
/// `a ← J†·a·J` and `v ← v·J`.
fn rotate(a: &mut [Complex64], v: &mut [Complex64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    let phase = apq / mag;

    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let w = phase.conj();
    let j_pp = Complex64::new(c, 0.0);
    let j_pq = Complex64::new(s, 0.0);
    let j_qp = -w * s;
    let j_qq = w * c;

    // a ← a·J (columns p, q)
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = akp * j_pp + akq * j_qp;
        a[k * n + q] = akp * j_pq + akq * j_qq;
    }
    // a ← J†·a (rows p, q)
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = j_pp.conj() * apk + j_qp.conj() * aqk;
        a[q * n + k] = j_pq.conj() * apk + j_qq.conj() * aqk;
    }
    a[p * n + q] = ZERO;
    a[q * n + p] = ZERO;
    a[p * n + p] = Complex64::new(a[p * n + p].re, 0.0);
    a[q * n + q] = Complex64::new(a[q * n + q].re, 0.0);

    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = vkp * j_pp + vkq * j_qp;
        v[k * n + q] = vkp * j_pq + vkq * j_qq;
    }
    debug_assert!((j_pp.norm_sqr() + j_qp.norm_sqr() - ONE.re).abs() < 1e-12);
}
