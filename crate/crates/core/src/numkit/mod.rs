//! Dense linear-algebra kernel: matrices, SVD, symmetric eigenproblems,
//! QR, pseudo-inverse, small LU solves and k-means.

pub mod eig;
pub mod kmeans;
pub mod lu;
pub mod matrix;
pub mod qr;
pub mod svd;

pub use eig::{sym_eig, top_eigenpairs, SymEig};
pub use kmeans::{kmeans, kmeans_with, KMeansConfig, KMeansResult};
pub use lu::{inverse, solve, Lu};
pub use matrix::{axpy, dot, norm1, norm2, norm_inf, Matrix};
pub use qr::{default_rank_tol, pinv, qr, range_basis, Qr};
pub use svd::{orthonormal_complement, svd, thin_svd, SvdResult};

/// Spectral norm (largest singular value).
pub fn spectral_norm<T: crate::Real>(m: &Matrix<T>) -> crate::Result<T> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(T::zero());
    }
    Ok(thin_svd(m)?.s[0])
}
