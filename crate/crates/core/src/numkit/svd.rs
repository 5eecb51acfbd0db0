//! One-sided (Hestenes) Jacobi singular value decomposition.
//!
//! The working set is the column set of the input (or of its transpose when
//! the input is wide). Pairs of columns are rotated until every pair is
//! numerically orthogonal; the column norms are then the singular values.
//! Pair order is fixed, so the result is a pure function of the input bits.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

/// Full singular value decomposition `m = u * diag(s) * vt`.
#[derive(Debug, Clone)]
pub struct SvdResult<T> {
    /// Left singular vectors (rows x rows for the full form).
    pub u: Matrix<T>,
    /// Singular values, nonincreasing and nonnegative.
    pub s: Vec<T>,
    /// Right singular vectors, transposed (cols x cols for the full form).
    pub vt: Matrix<T>,
}

impl<T: Real> SvdResult<T> {
    /// Rebuilds `u * diag(s) * vt` (works for both full and thin forms).
    pub fn reconstruct(&self) -> Matrix<T> {
        let k = self.s.len();
        let (m, n) = (self.u.rows(), self.vt.cols());
        Matrix::from_fn(m, n, |r, c| {
            let mut acc = T::zero();
            for j in 0..k {
                acc += self.u[(r, j)] * self.s[j] * self.vt[(j, c)];
            }
            acc
        })
    }

    /// Number of singular values strictly above `tol * max(s)`.
    pub fn rank(&self, tol: T) -> usize {
        let smax = self.s.first().copied().unwrap_or(T::zero());
        self.s.iter().filter(|&&v| v > tol * smax).count()
    }
}

/// Full SVD: `u` is rows x rows, `vt` is cols x cols.
pub fn svd<T: Real>(m: &Matrix<T>) -> Result<SvdResult<T>> {
    decompose(m, true)
}

/// Thin SVD: `u` is rows x k, `vt` is k x cols, with `k = min(rows, cols)`.
pub fn thin_svd<T: Real>(m: &Matrix<T>) -> Result<SvdResult<T>> {
    decompose(m, false)
}

fn decompose<T: Real>(m: &Matrix<T>, full: bool) -> Result<SvdResult<T>> {
    m.check_finite()?;
    if m.rows() >= m.cols() {
        let (u, s, v) = tall(m, full)?;
        Ok(SvdResult {
            u,
            s,
            vt: v.transpose(),
        })
    } else {
        let (u, s, v) = tall(&m.transpose(), full)?;
        Ok(SvdResult {
            u: v,
            s,
            vt: u.transpose(),
        })
    }
}

/// Jacobi on a tall (rows >= cols) matrix. Returns (u, s, v) with `m = u s v^T`.
fn tall<T: Real>(m: &Matrix<T>, full: bool) -> Result<(Matrix<T>, Vec<T>, Matrix<T>)> {
    let (rows, n) = m.shape();
    let mut w = m.columns();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon();
    // columns below roundoff of the whole matrix are treated as zero
    let floor = {
        let f = eps * m.frobenius_norm();
        f * f
    };
    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        converged = true;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == T::zero()
                    || gamma.abs() <= eps * (alpha * beta).sqrt()
                    || alpha.min(beta) <= floor
                {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        let mut worst = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                let (a, b) = (dot(&w[p], &w[p]), dot(&w[q], &w[q]));
                let d = (a * b).sqrt();
                if d > T::zero() && a.min(b) > floor {
                    worst = worst.max(dot(&w[p], &w[q]).abs() / d);
                }
            }
        }
        return Err(Error::NotConverged {
            what: "jacobi svd",
            iterations: sweeps,
            residual: worst.to_f64_lossy(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<T> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let smax = norms.iter().fold(T::zero(), |a, &b| a.max(b));
    let tiny = smax * eps * T::of(rows.max(n));
    let mut s = Vec::with_capacity(n);
    let mut ucols: Vec<Vec<T>> = Vec::with_capacity(if full { rows } else { n });
    let mut vcols = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for &j in &order {
        let sj = norms[j];
        s.push(sj);
        vcols.push(v[j].clone());
        if sj > tiny && sj > T::zero() {
            ucols.push(w[j].iter().map(|&x| x / sj).collect());
        } else {
            pending.push(ucols.len());
            ucols.push(Vec::new());
        }
    }
    // Null directions: complete the left basis with orthonormal vectors.
    let target = if full { rows } else { n };
    let filled: Vec<Vec<T>> = ucols.iter().filter(|c| !c.is_empty()).cloned().collect();
    let mut extra = orthonormal_complement(&filled, rows, target - filled.len());
    for slot in pending {
        ucols[slot] = extra.remove(0);
    }
    ucols.extend(extra);

    Ok((Matrix::from_cols(&ucols)?, s, Matrix::from_cols(&vcols)?))
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let (a, b) = (&mut lo[p], &mut hi[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Returns `count` unit vectors of length `dim` orthogonal to `basis` and to
/// each other, produced by Gram-Schmidt on the standard basis.
pub fn orthonormal_complement<T: Real>(basis: &[Vec<T>], dim: usize, count: usize) -> Vec<Vec<T>> {
    let mut all: Vec<Vec<T>> = basis.to_vec();
    let mut out = Vec::with_capacity(count);
    for e in 0..dim {
        if out.len() == count {
            break;
        }
        let mut cand = vec![T::zero(); dim];
        cand[e] = T::one();
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for b in &all {
                let proj = dot(&cand, b);
                for (c, &bv) in cand.iter_mut().zip(b) {
                    *c -= proj * bv;
                }
            }
        }
        let nrm = dot(&cand, &cand).sqrt();
        if nrm > T::lit(1e-6) {
            let unit: Vec<T> = cand.iter().map(|&x| x / nrm).collect();
            all.push(unit.clone());
            out.push(unit);
        }
    }
    out
}
