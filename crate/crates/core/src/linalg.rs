//! Thin wrappers over nalgebra's symmetric/Hermitian eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

const MAX_SWEEPS: usize = 10_000;

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending and
/// eigenvectors as matching columns. `None` if the QR iteration does not
/// converge.
pub fn symmetric_eigen(m: DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Some((Vec::new(), m));
    }
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, MAX_SWEEPS)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Some((values, vectors))
}

/// Ascending eigenvalues of a Hermitian matrix.
///
/// Uses the real symmetric embedding `[[A, −B], [B, A]]` of `A + iB`, whose
/// spectrum is that of the input with every eigenvalue doubled; the real
/// solver is more robust than the complex one. The matrix is shifted by its
/// largest entry first: the QR deflation test compares off-diagonals with
/// the diagonal and never fires on exactly-zero diagonal pairs, which is the
/// typical shape of a low-rank density matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Option<Vec<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Some(Vec::new());
    }
    let shift = m.iter().fold(1.0f64, |a, z| a.max(z.norm()));
    let embedded = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = m[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) if r == c => z.re + shift,
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let (values, _) = symmetric_eigen(embedded)?;
    Some(values.into_iter().step_by(2).map(|v| v - shift).collect())
}

/// `max |M_ij − conj(M_ji)|`.
pub fn hermiticity_error(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_eigenpairs() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, -5.0]);
        let (vals, vecs) = symmetric_eigen(m.clone()).unwrap();
        assert!((vals[0] + 5.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        assert!((vals[2] - 3.0).abs() < 1e-14);
        for (k, val) in vals.iter().enumerate() {
            let v = vecs.column(k);
            assert!((&m * v - v * *val).norm() < 1e-13);
        }
    }

    #[test]
    fn hermitian_values() {
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        let m = DMatrix::from_row_slice(2, 2, &[one, -i, i, one]);
        let vals = hermitian_eigenvalues(&m).unwrap();
        assert!(vals[0].abs() < 1e-14 && (vals[1] - 2.0).abs() < 1e-14);
        assert_eq!(hermiticity_error(&m), 0.0);
    }
}
