//! Householder QR and the SVD-based pseudo-inverse.

use super::matrix::Matrix;
use super::svd::thin_svd;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Thin QR factors of a tall matrix: `q` is rows x cols with orthonormal
/// columns, `r` is cols x cols upper triangular with a nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    pub q: Matrix<T>,
    pub r: Matrix<T>,
}

pub fn qr<T: Real>(m: &Matrix<T>) -> Result<Qr<T>> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::Dimension(format!(
            "qr needs rows >= cols, got {rows}x{cols}"
        )));
    }
    m.check_finite()?;
    let mut a = m.columns();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(cols);
    for k in 0..cols {
        let x = &a[k][k..];
        let alpha = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        let mut v: Vec<T> = x.to_vec();
        let sign = if v[0] >= T::zero() {
            T::one()
        } else {
            -T::one()
        };
        v[0] += sign * alpha;
        let vnorm2: T = v.iter().map(|&t| t * t).sum();
        if vnorm2 > T::zero() {
            for col in a.iter_mut().skip(k) {
                let proj: T = v.iter().zip(&col[k..]).map(|(&p, &q)| p * q).sum::<T>();
                let f = (proj + proj) / vnorm2;
                for (c, &vi) in col[k..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
        }
        reflectors.push(v);
    }
    let mut r = Matrix::from_fn(cols, cols, |i, j| if i <= j { a[j][i] } else { T::zero() });
    // Q = H_0 H_1 ... H_{cols-1} applied to the first `cols` unit vectors.
    let mut qcols: Vec<Vec<T>> = (0..cols)
        .map(|j| {
            let mut e = vec![T::zero(); rows];
            e[j] = T::one();
            e
        })
        .collect();
    for (k, v) in reflectors.iter().enumerate().rev() {
        let vnorm2: T = v.iter().map(|&t| t * t).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        for col in qcols.iter_mut() {
            let proj: T = v.iter().zip(&col[k..]).map(|(&p, &q)| p * q).sum::<T>();
            let f = (proj + proj) / vnorm2;
            for (c, &vi) in col[k..].iter_mut().zip(v) {
                *c -= f * vi;
            }
        }
    }
    // Make the diagonal of r nonnegative.
    for j in 0..cols {
        if r[(j, j)] < T::zero() {
            for c in j..cols {
                r[(j, c)] = -r[(j, c)];
            }
            for x in qcols[j].iter_mut() {
                *x = -*x;
            }
        }
    }
    Ok(Qr {
        q: Matrix::from_cols(&qcols)?,
        r,
    })
}

/// Default relative rank tolerance: `1e-10 * max(rows, cols)`.
pub fn default_rank_tol<T: Real>(m: &Matrix<T>) -> T {
    T::lit(1e-10) * T::of(m.rows().max(m.cols()))
}

/// Moore-Penrose pseudo-inverse; singular values at or below `tol * max(s)`
/// are treated as zero.
pub fn pinv<T: Real>(m: &Matrix<T>, tol: T) -> Result<Matrix<T>> {
    if tol < T::zero() {
        return Err(Error::InvalidArgument("pinv tolerance must be >= 0".into()));
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Matrix::zeros(cols, rows));
    }
    let svd = thin_svd(m)?;
    let smax = svd.s.first().copied().unwrap_or(T::zero());
    let cutoff = tol * smax;
    let k = svd.s.len();
    let mut out = Matrix::zeros(cols, rows);
    for j in 0..k {
        let sj = svd.s[j];
        if sj <= cutoff || sj == T::zero() {
            continue;
        }
        let inv = T::one() / sj;
        for r in 0..cols {
            let vr = svd.vt[(j, r)] * inv;
            if vr == T::zero() {
                continue;
            }
            for c in 0..rows {
                out[(r, c)] += vr * svd.u[(c, j)];
            }
        }
    }
    Ok(out)
}

/// Orthonormal basis for the column span of `m`, with rank decided by
/// `tol * max(s)`.
pub fn range_basis<T: Real>(m: &Matrix<T>, tol: T) -> Result<Matrix<T>> {
    let svd = thin_svd(m)?;
    let rank = svd.rank(tol);
    let idx: Vec<usize> = (0..rank).collect();
    Ok(svd.u.select_cols(&idx))
}
