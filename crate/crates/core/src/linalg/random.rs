//! Random matrices for tests and verification sampling.
//!
//! All samplers take the generator explicitly so callers control seeding.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{inner, ComplexMatrix};

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre matrix: i.i.d. standard complex normal entries.
pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| random_complex(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    random_matrix(n, n, rng).hermitian_part()
}

/// `G·G† / Tr(G·G†)` for a Ginibre `G`: full-rank, unit trace.
pub fn random_density_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = random_matrix(n, n, rng);
    let rho = &g * &g.adjoint();
    let tr = rho.trace().re;
    rho.hermitian_part().scale_real(1.0 / tr)
}

/// Random pure state `|ψ⟩⟨ψ|`.
pub fn random_pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let mut v: Vec<Complex64> = (0..n).map(|_| random_complex(rng)).collect();
    let norm = inner(&v, &v).re.sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    ComplexMatrix::outer(&v, &v)
}

/// Unitary from Gram–Schmidt on the columns of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = random_matrix(n, n, rng);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut v: Vec<Complex64> = (0..n).map(|r| g.get(r, c)).collect();
        for u in &cols {
            let proj = inner(u, &v);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = inner(&v, &v).re.sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        cols.push(v);
    }
    ComplexMatrix::from_fn(n, n, |r, c| cols[c][r])
}
