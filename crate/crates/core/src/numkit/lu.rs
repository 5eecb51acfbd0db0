//! Gaussian elimination with partial pivoting for small dense systems.

use super::matrix::Matrix;
use crate::scalar::Real;

/// LU factors with row permutation, `P A = L U`, packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Factors a square matrix. Returns `None` when a pivot falls below
    /// `pivot_tol` times the largest entry.
    pub fn factor(a: &Matrix<T>, pivot_tol: T) -> Option<Self> {
        let n = a.rows();
        debug_assert_eq!(n, a.cols());
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        if scale == T::zero() && n > 0 {
            return None;
        }
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for r in (k + 1)..n {
                let v = lu[(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= pivot_tol * scale {
                return None;
            }
            if p != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = tmp;
                }
                perm.swap(k, p);
            }
            let piv = lu[(k, k)];
            for r in (k + 1)..n {
                let f = lu[(r, k)] / piv;
                lu[(r, k)] = f;
                if f != T::zero() {
                    for c in (k + 1)..n {
                        let u = lu[(k, c)];
                        lu[(r, c)] -= f * u;
                    }
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.perm.len();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[(r, c)] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in (r + 1)..n {
                s -= self.lu[(r, c)] * x[c];
            }
            x[r] = s / self.lu[(r, r)];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.perm.len();
        // U^T z = b
        let mut z = b.to_vec();
        for r in 0..n {
            let mut s = z[r];
            for c in 0..r {
                s -= self.lu[(c, r)] * z[c];
            }
            z[r] = s / self.lu[(r, r)];
        }
        // L^T w = z
        for r in (0..n).rev() {
            let mut s = z[r];
            for c in (r + 1)..n {
                s -= self.lu[(c, r)] * z[c];
            }
            z[r] = s;
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

/// Solves a square system, `None` if numerically singular.
pub fn solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    Lu::factor(a, T::epsilon() * T::lit(64.0)).map(|lu| lu.solve(b))
}

/// Explicit inverse, `None` if numerically singular.
pub fn inverse<T: Real>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.rows();
    let lu = Lu::factor(a, T::epsilon() * T::lit(64.0))?;
    let mut out = Matrix::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[j] = T::one();
        out.set_col(j, &lu.solve(&e));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_and_transposes() {
        let a = Matrix::from_rows(&[
            vec![0.0f64, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![3.0, 0.0, 1.0],
        ])
        .unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let x = solve(&a, &b).unwrap();
        let ax = a.matvec(&x);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-14));
        let lu = Lu::factor(&a, 1e-14).unwrap();
        let y = lu.solve_transpose(&b);
        let aty = a.tr_matvec(&y);
        assert!(aty.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-14));
    }

    #[test]
    fn singular_is_none() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(solve(&a, &[1.0, 1.0]).is_none());
        assert!(inverse(&a).is_none());
    }
}
