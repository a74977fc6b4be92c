//! Power iteration for spectral radii and 2-norms.
//!
//! The matrices involved (gain matrices and their splitting iteration
//! matrices) are symmetric or similar to a symmetric matrix, so plain power
//! iteration with a norm-ratio estimate converges to the largest eigenvalue
//! magnitude. Dense eigensolvers stay out of the hot path; tests check these
//! estimates against one.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Largest |eigenvalue| of a symmetric matrix via a dense eigendecomposition.
/// Exact to machine precision regardless of eigenvalue clustering, where
/// power iteration can stall; use this when the matrix is small enough to
/// form densely and the answer feeds a convergence decision.
pub fn symmetric_radius(matrix: &DMatrix<f64>) -> f64 {
    matrix
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs()))
}

/// Largest |eigenvalue| of the linear operator `apply`, assumed to have a
/// real spectrum (symmetric or symmetric-similar operator).
pub fn spectral_radius<F>(n: usize, tol: f64, max_iter: usize, mut apply: F) -> f64
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed);
    let mut v: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = apply(&v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        // two applications per step so a +/- lambda pair cannot stall the ratio
        let w2 = apply(&(w.clone() / norm));
        let next = libm::sqrt(norm * w2.norm());
        let done = (next - estimate).abs() <= tol * next.max(1.0);
        estimate = next;
        let n2 = w2.norm();
        if n2 == 0.0 {
            return 0.0;
        }
        v = w2 / n2;
        if done {
            break;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn diagonal_matrix_radius() {
        let d = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, -3.0, 2.0]));
        let rho = spectral_radius(3, 1e-12, 10_000, |v| &d * v);
        assert!((rho - 3.0).abs() < 1e-8);
    }

    #[test]
    fn sign_symmetric_spectrum_converges() {
        // eigenvalues +2 and -2: single-step ratio oscillates, squared step must not
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        let rho = spectral_radius(2, 1e-12, 10_000, |v| &m * v);
        assert!((rho - 2.0).abs() < 1e-8);
    }

    #[test]
    fn zero_operator() {
        let rho = spectral_radius(4, 1e-10, 100, |v| DVector::zeros(v.len()));
        assert_eq!(rho, 0.0);
    }

    #[test]
    fn matches_dense_eigen_on_random_symmetric() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        for _ in 0..10 {
            let raw = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0f64));
            let sym = (&raw + raw.transpose()) * 0.5;
            let rho = spectral_radius(8, 1e-12, 50_000, |v| &sym * v);
            let eig = sym.clone().symmetric_eigen();
            let expect = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
            assert!((rho - expect).abs() < 1e-7, "{rho} vs {expect}");
        }
    }
}
