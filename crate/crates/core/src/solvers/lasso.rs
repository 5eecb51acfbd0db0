//! LASSO `min 1/2 ||b - A c||^2 + lambda ||c||_1` by the homotopy path.
//!
//! The path starts at `lambda_max = ||A^T b||_inf` with `c = 0` and follows
//! the piecewise-linear solution down to the requested `lambda`, adding a
//! column when its correlation reaches the current penalty and removing one
//! when its coefficient crosses zero. The Gram matrix of the active set is
//! kept as a Cholesky factor that grows by one row per join.

use crate::error::{Error, Result};
use crate::numkit::{dot, norm_inf, Matrix};
use crate::scalar::Real;
use crate::uosgen::ObservedMatrix;

/// Default tuning parameter of the penalty rule.
pub const DEFAULT_LASSO_ALPHA: f64 = 7.34;

/// Lower-triangular Cholesky factor stored by rows.
struct Chol<T> {
    l: Vec<Vec<T>>,
}

impl<T: Real> Chol<T> {
    fn new() -> Self {
        Self { l: Vec::new() }
    }

    fn forward(&self, g: &[T]) -> Vec<T> {
        let mut w = g.to_vec();
        for i in 0..self.l.len() {
            let mut s = w[i];
            for j in 0..i {
                s -= self.l[i][j] * w[j];
            }
            w[i] = s / self.l[i][i];
        }
        w
    }

    fn solve(&self, g: &[T]) -> Vec<T> {
        let mut x = self.forward(g);
        for i in (0..self.l.len()).rev() {
            let mut s = x[i];
            for j in (i + 1)..self.l.len() {
                s -= self.l[j][i] * x[j];
            }
            x[i] = s / self.l[i][i];
        }
        x
    }

    /// Appends a row given the cross products with the current set and the
    /// squared norm of the new column. Returns false when the new column is
    /// numerically dependent.
    fn push(&mut self, cross: &[T], sq: T) -> bool {
        let w = self.forward(cross);
        let rest = sq - w.iter().map(|&v| v * v).sum::<T>();
        if rest <= sq * T::epsilon() * T::lit(1e4) {
            return false;
        }
        let mut row = w;
        row.push(rest.sqrt());
        self.l.push(row);
        true
    }
}

fn rebuild<T: Real>(cols: &[Vec<T>], active: &[usize]) -> Result<Chol<T>> {
    let mut ch = Chol::new();
    for (t, &j) in active.iter().enumerate() {
        let cross: Vec<T> = active[..t]
            .iter()
            .map(|&i| dot(&cols[i], &cols[j]))
            .collect();
        if !ch.push(&cross, dot(&cols[j], &cols[j])) {
            return Err(Error::Degenerate(
                "lasso active set became linearly dependent".into(),
            ));
        }
    }
    Ok(ch)
}

/// Minimiser of `1/2 ||b - A c||^2 + lambda ||c||_1`.
pub fn lasso<T: Real>(a: &Matrix<T>, b: &[T], lambda: T) -> Result<Vec<T>> {
    let (m, k) = a.shape();
    if b.len() != m {
        return Err(Error::Dimension(format!(
            "b has {} entries, A has {m} rows",
            b.len()
        )));
    }
    if !(lambda > T::zero()) {
        return Err(Error::InvalidArgument(
            "lasso penalty must be positive".into(),
        ));
    }
    a.check_finite()?;
    let cols = a.columns();
    let usable: Vec<bool> = cols
        .iter()
        .map(|c| c.iter().any(|&v| v != T::zero()))
        .collect();
    let atb = a.tr_matvec(b);
    let scale = T::one().max(norm_inf(&atb));
    let mut c = vec![T::zero(); k];
    let mut corr = atb.clone();
    let mut lam = norm_inf(&corr);
    if lambda >= lam {
        return Ok(c);
    }
    let first = (0..k)
        .filter(|&j| usable[j])
        .max_by(|&i, &j| corr[i].abs().partial_cmp(&corr[j].abs()).unwrap())
        .unwrap();
    let mut active = vec![first];
    let mut ch = rebuild(&cols, &active)?;
    let mut just_left: Option<usize> = None;
    let tiny = T::epsilon() * T::lit(64.0) * scale;
    let max_steps = 20 * (k + m) + 100;
    let mut steps = 0;
    loop {
        steps += 1;
        if steps > max_steps {
            return Err(Error::NotConverged {
                what: "lasso homotopy",
                iterations: steps,
                residual: f64::NAN,
            });
        }
        let signs: Vec<T> = active.iter().map(|&j| corr[j].signum()).collect();
        let d = ch.solve(&signs);
        let mut u = vec![T::zero(); m];
        for (&j, &dj) in active.iter().zip(&d) {
            crate::numkit::axpy(dj, &cols[j], &mut u);
        }
        let av: Vec<T> = cols.iter().map(|col| dot(col, &u)).collect();

        let mut step = lam - lambda;
        let mut event: Option<(usize, bool)> = None; // (index, joins)
        for j in 0..k {
            if !usable[j] || active.contains(&j) || Some(j) == just_left {
                continue;
            }
            for (num, den) in [
                (lam - corr[j], T::one() - av[j]),
                (lam + corr[j], T::one() + av[j]),
            ] {
                if den > T::epsilon() {
                    let g = num / den;
                    if g > T::zero() && g < step {
                        step = g;
                        event = Some((j, true));
                    }
                }
            }
        }
        for (t, &j) in active.iter().enumerate() {
            if d[t] != T::zero() {
                let g = -c[j] / d[t];
                if g > T::zero() && g < step {
                    step = g;
                    event = Some((j, false));
                }
            }
        }
        for (&j, &dj) in active.iter().zip(&d) {
            c[j] += step * dj;
        }
        lam -= step;
        // fresh correlations to stop drift
        let mut r = b.to_vec();
        for &j in &active {
            crate::numkit::axpy(-c[j], &cols[j], &mut r);
        }
        corr = a.tr_matvec(&r);
        just_left = None;
        match event {
            None => break,
            Some((j, true)) => {
                let cross: Vec<T> = active.iter().map(|&i| dot(&cols[i], &cols[j])).collect();
                if ch.push(&cross, dot(&cols[j], &cols[j])) {
                    active.push(j);
                } else {
                    return Err(Error::Degenerate(
                        "lasso path hit a dependent column".into(),
                    ));
                }
            }
            Some((j, false)) => {
                c[j] = T::zero();
                active.retain(|&i| i != j);
                just_left = Some(j);
                if active.is_empty() {
                    let next = (0..k)
                        .filter(|&i| usable[i] && i != j)
                        .max_by(|&x, &y| corr[x].abs().partial_cmp(&corr[y].abs()).unwrap());
                    match next {
                        Some(n) if corr[n].abs() > tiny => active.push(n),
                        _ => break,
                    }
                }
                ch = rebuild(&cols, &active)?;
            }
        }
        if lam <= lambda {
            break;
        }
    }
    polish(&cols, b, lambda, &mut c, &active)?;
    let resid = kkt_residual(a, b, &c, lambda);
    if resid > T::lit(1e-8).max(T::epsilon() * T::lit(1e4)) * scale {
        return Err(Error::NotConverged {
            what: "lasso",
            iterations: steps,
            residual: resid.to_f64_lossy(),
        });
    }
    Ok(c)
}

/// Re-solves the stationarity equations on the final support and sign
/// pattern, keeping the result only if it is sign consistent.
fn polish<T: Real>(
    cols: &[Vec<T>],
    b: &[T],
    lambda: T,
    c: &mut [T],
    active: &[usize],
) -> Result<()> {
    let support: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&j| c[j] != T::zero())
        .collect();
    if support.is_empty() {
        return Ok(());
    }
    let ch = rebuild(cols, &support)?;
    let rhs: Vec<T> = support
        .iter()
        .map(|&j| dot(&cols[j], b) - lambda * c[j].signum())
        .collect();
    let x = ch.solve(&rhs);
    if support.iter().zip(&x).all(|(&j, &v)| v * c[j] > T::zero()) {
        for (&j, &v) in support.iter().zip(&x) {
            c[j] = v;
        }
    }
    Ok(())
}

/// Largest violation of the subgradient optimality conditions.
pub(crate) fn kkt_residual<T: Real>(a: &Matrix<T>, b: &[T], c: &[T], lambda: T) -> T {
    let ac = a.matvec(c);
    let r: Vec<T> = b.iter().zip(&ac).map(|(&p, &q)| p - q).collect();
    let g = a.tr_matvec(&r);
    g.iter()
        .zip(c)
        .map(|(&gj, &cj)| {
            if cj != T::zero() {
                (gj - lambda * cj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(T::zero())
            }
        })
        .fold(T::zero(), T::max)
}

/// `alpha / max_{i != j} |x_i^T x_j|` over zero-filled columns.
pub fn lasso_lambda_rule<T: Real>(x: &ObservedMatrix<T>, alpha: T) -> Result<T> {
    let n = x.cols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "penalty rule needs at least two columns".into(),
        ));
    }
    let cols = x.values().columns();
    let mut best = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max(dot(&cols[i], &cols[j]).abs());
        }
    }
    if best == T::zero() {
        return Err(Error::Degenerate("all column cross products vanish".into()));
    }
    Ok(alpha / best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn objective(a: &Matrix<f64>, b: &[f64], c: &[f64], lambda: f64) -> f64 {
        let ac = a.matvec(c);
        0.5 * b.iter().zip(&ac).map(|(p, q)| (p - q).powi(2)).sum::<f64>()
            + lambda * c.iter().map(|v| v.abs()).sum::<f64>()
    }

    #[test]
    fn large_penalty_gives_zero() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let b = [1.0, 1.0];
        let lmax = norm_inf(&a.tr_matvec(&b));
        assert_eq!(lasso(&a, &b, lmax).unwrap(), vec![0.0, 0.0]);
        assert_eq!(lasso(&a, &b, 10.0 * lmax).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_is_soft_threshold() {
        let b = [3.0f64, -0.5, 1.2, -2.0];
        let c = lasso(&Matrix::<f64>::identity(4), &b, 1.0).unwrap();
        let expect: Vec<f64> = b
            .iter()
            .map(|&v: &f64| v.signum() * (v.abs() - 1.0).max(0.0))
            .collect();
        assert!(c.iter().zip(&expect).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    fn prox_grad(a: &Matrix<f64>, b: &[f64], lambda: f64) -> Vec<f64> {
        let lip = crate::numkit::spectral_norm(a).unwrap().powi(2);
        let step = 1.0 / lip;
        let mut x = vec![0.0; a.cols()];
        let mut y = x.clone();
        let mut t = 1.0f64;
        for _ in 0..200_000 {
            let ay = a.matvec(&y);
            let r: Vec<f64> = ay.iter().zip(b).map(|(p, q)| p - q).collect();
            let g = a.tr_matvec(&r);
            let xn: Vec<f64> = y
                .iter()
                .zip(&g)
                .map(|(&yi, &gi)| {
                    let z = yi - step * gi;
                    z.signum() * (z.abs() - step * lambda).max(0.0)
                })
                .collect();
            let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let diff: f64 = xn
                .iter()
                .zip(&x)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            y = xn
                .iter()
                .zip(&x)
                .map(|(&p, &q)| p + (t - 1.0) / tn * (p - q))
                .collect();
            x = xn;
            t = tn;
            if diff < 1e-14 {
                break;
            }
        }
        x
    }

    #[test]
    fn matches_proximal_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let a: Matrix<f64> = Matrix::from_fn(10, 20, |_, _| rng.random_range(-1.0..1.0));
            let b: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lambda = 0.1 * norm_inf(&a.tr_matvec(&b));
            let c = lasso(&a, &b, lambda).unwrap();
            let oracle = prox_grad(&a, &b, lambda);
            assert!(
                (objective(&a, &b, &c, lambda) - objective(&a, &b, &oracle, lambda)).abs() < 1e-10
            );
            assert!(kkt_residual(&a, &b, &c, lambda) < 1e-8);
        }
    }

    #[test]
    fn small_penalty_approaches_basis_pursuit_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Matrix<f64> = Matrix::from_fn(6, 12, |_, _| rng.random_range(-1.0..1.0));
        let mut c0 = vec![0.0; 12];
        c0[1] = 1.0;
        c0[7] = -0.5;
        let b = a.matvec(&c0);
        let bp = crate::solvers::basis_pursuit(&a, &b).unwrap();
        let c = lasso(&a, &b, 1e-7).unwrap();
        let supp: Vec<usize> = (0..12).filter(|&j| c[j].abs() > 1e-4).collect();
        assert_eq!(supp, bp.support);
    }

    #[test]
    fn lambda_rule_cases() {
        let data = Matrix::from_rows(&[vec![1.0f64, 1.0], vec![0.0, 0.0]]).unwrap();
        let obs = ObservedMatrix::fully_observed(&data);
        assert!((lasso_lambda_rule(&obs, 7.34).unwrap() - 7.34).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = Matrix::from_fn(4, 5, |_, _| rng.random_range(-1.0f64..1.0));
        let mask: Vec<bool> = (0..20).map(|i| i % 3 != 0).collect();
        let obs = ObservedMatrix::new(&data, mask).unwrap();
        let z = obs.values();
        let mut brute = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    brute = brute.max(dot(&z.col(i), &z.col(j)).abs());
                }
            }
        }
        assert!((lasso_lambda_rule(&obs, 2.0).unwrap() - 2.0 / brute).abs() < 1e-14);

        let ortho = ObservedMatrix::fully_observed(&Matrix::<f64>::identity(3));
        assert!(lasso_lambda_rule(&ortho, 1.0).is_err());
    }
}
