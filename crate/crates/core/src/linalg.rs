//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Frobenius inner product `tr(AᵀB)`.
pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn all_finite(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Eigen-decomposition of a symmetric matrix with eigenpairs sorted by
/// decreasing eigenvalue. Eigenvectors are the columns of the returned matrix.
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Thin QR with the sign convention `diag(R) ≥ 0`. Returns `None` when the
/// input is numerically rank deficient.
pub fn thin_qr_positive(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = a.ncols();
    let qr = a.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    for j in 0..k {
        let rjj = r[(j, j)];
        if rjj.abs() <= 1e-12 * scale || !rjj.is_finite() {
            return None;
        }
        if rjj < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    Some(q)
}

/// Random `d×k` matrix with orthonormal columns (QR of a Gaussian matrix).
pub fn random_orthonormal<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let g = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Some(q) = thin_qr_positive(&g) {
            return q;
        }
    }
}

/// Random orthogonal `k×k` matrix.
pub fn random_rotation<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DMatrix<f64> {
    random_orthonormal(k, k, rng)
}

pub fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
}
