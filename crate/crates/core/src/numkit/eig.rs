//! Symmetric eigendecomposition: Householder reduction to tridiagonal form
//! followed by the implicit QL iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{axpy, dot, norm2, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_QL_ITER: usize = 60;

/// Eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: Matrix<T>,
}

/// Eigendecomposition of a symmetric matrix. Inputs whose asymmetry exceeds
/// `1e-10 * max(1, max|m|)` are rejected.
pub fn sym_eig<T: Real>(m: &Matrix<T>) -> Result<SymEig<T>> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::Dimension(format!(
            "sym_eig needs a square matrix, got {:?}",
            m.shape()
        )));
    }
    m.check_finite()?;
    let asym = m.asymmetry();
    let tol = T::lit(1e-10) * T::one().max(m.max_abs());
    if asym > tol {
        return Err(Error::NotSymmetric(asym.to_f64_lossy()));
    }
    if n == 0 {
        return Ok(SymEig {
            values: vec![],
            vectors: Matrix::zeros(0, 0),
        });
    }
    // Symmetrize exactly from the lower triangle.
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if j <= i { m[(i, j)] } else { m[(j, i)] })
                .collect()
        })
        .collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    Ok(SymEig {
        values: d,
        vectors: Matrix::from_rows(&v)?,
    })
}

/// The `count` largest eigenpairs of a symmetric matrix, values in
/// descending order.
///
/// Uses a block Krylov basis with full reorthogonalisation followed by a
/// Rayleigh-Ritz step; the block size exceeds `count`, so repeated
/// eigenvalues (e.g. several disconnected graph components) are resolved.
/// The basis grows until every Ritz residual is below `1e-9 * max(1, |m|)`
/// and falls back to [`sym_eig`] if it reaches the full dimension.
pub fn top_eigenpairs<T: Real>(m: &Matrix<T>, count: usize, seed: u64) -> Result<SymEig<T>> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::Dimension(format!(
            "top_eigenpairs needs a square matrix, got {:?}",
            m.shape()
        )));
    }
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!(
            "cannot take {count} eigenpairs of a {n}x{n} matrix"
        )));
    }
    m.check_finite()?;
    let asym = m.asymmetry();
    if asym > T::lit(1e-10) * T::one().max(m.max_abs()) {
        return Err(Error::NotSymmetric(asym.to_f64_lossy()));
    }
    let block = (count + 4).min(n);
    let mut limit = (4 * block).max(40).min(n);
    let tol = T::lit(1e-9) * T::one().max(m.max_abs() * T::of(n).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<Vec<T>> = (0..block)
        .map(|_| {
            (0..n)
                .map(|_| T::lit(rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    while n > 40 && limit <= n {
        let basis = krylov_basis(m, &start, limit);
        let s = basis.len();
        let mq: Vec<Vec<T>> = basis.iter().map(|q| m.matvec(q)).collect();
        let h = Matrix::from_fn(s, s, |i, j| {
            let v = dot(&basis[i], &mq[j]);
            let w = dot(&basis[j], &mq[i]);
            (v + w) / T::lit(2.0)
        });
        let small = sym_eig(&h)?;
        if s < count {
            break;
        }
        let mut values = Vec::with_capacity(count);
        let mut vecs = Vec::with_capacity(count);
        let mut worst = T::zero();
        for t in 0..count {
            let idx = s - 1 - t;
            let theta = small.values[idx];
            let z = small.vectors.col(idx);
            let mut y = vec![T::zero(); n];
            let mut my = vec![T::zero(); n];
            for (j, &zj) in z.iter().enumerate() {
                axpy(zj, &basis[j], &mut y);
                axpy(zj, &mq[j], &mut my);
            }
            let res: Vec<T> = my.iter().zip(&y).map(|(&a, &b)| a - theta * b).collect();
            worst = worst.max(norm2(&res));
            values.push(theta);
            vecs.push(y);
        }
        if worst <= tol || s >= n {
            return Ok(SymEig {
                values,
                vectors: Matrix::from_cols(&vecs)?,
            });
        }
        if s < limit || limit >= n / 2 {
            break;
        }
        limit = (2 * limit).min(n);
    }
    let full = sym_eig(m)?;
    let idx: Vec<usize> = (0..count).map(|t| n - 1 - t).collect();
    Ok(SymEig {
        values: idx.iter().map(|&i| full.values[i]).collect(),
        vectors: full.vectors.select_cols(&idx),
    })
}

/// Orthonormal basis of the block Krylov space generated from `start`,
/// capped at `limit` vectors.
fn krylov_basis<T: Real>(m: &Matrix<T>, start: &[Vec<T>], limit: usize) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(limit);
    let mut block: Vec<Vec<T>> = start.to_vec();
    while basis.len() < limit {
        let mut added = Vec::new();
        for mut v in block {
            if basis.len() >= limit {
                break;
            }
            let before = norm2(&v);
            if before == T::zero() {
                continue;
            }
            for _ in 0..2 {
                for q in &basis {
                    let p = dot(q, &v);
                    axpy(-p, q, &mut v);
                }
            }
            let after = norm2(&v);
            if after <= T::lit(1e-10) * before {
                continue;
            }
            let inv = T::one() / after;
            v.iter_mut().for_each(|x| *x *= inv);
            added.push(basis.len());
            basis.push(v);
        }
        if added.is_empty() {
            break;
        }
        block = added.iter().map(|&i| m.matvec(&basis[i])).collect();
    }
    basis
}

fn tred2<T: Real>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
                v[j][i] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[k][j] -= upd;
                }
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[k][j] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = T::zero();
    }
    v[n - 1][n - 1] = T::one();
    e[0] = T::zero();
}

fn tql2<T: Real>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITER {
                    return Err(Error::NotConverged {
                        what: "symmetric QL",
                        iterations: iter,
                        residual: e[l].abs().to_f64_lossy(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (e[l] + e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    // selection sort into ascending order, carrying vectors along
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in v.iter_mut() {
                row.swap(i, k);
            }
        }
    }
    Ok(())
}
