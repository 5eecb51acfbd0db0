//! l1 solvers: basis pursuit with exact dual recovery, the LP dual direction
//! used by the certificates, and the LASSO.

mod lasso;
mod simplex;

pub use lasso::{lasso, lasso_lambda_rule, DEFAULT_LASSO_ALPHA};

use crate::error::{Error, Result};
use crate::numkit::{norm1, norm2, norm_inf, range_basis, Matrix};
use crate::scalar::Real;

/// Relative feasibility tolerance for equality constraints.
pub const FEAS_TOL: f64 = 1e-8;
/// Relative duality-gap tolerance.
pub const GAP_TOL: f64 = 1e-8;

/// Optimal primal/dual pair of a basis-pursuit problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution<T> {
    pub c: Vec<T>,
    pub nu: Vec<T>,
    pub primal_obj: T,
    pub dual_obj: T,
    pub gap: T,
    /// Indices with `|c_j| > 1e-6 * max|c|`.
    pub support: Vec<usize>,
}

impl<T: Real> SparseSolution<T> {
    fn assemble(c: Vec<T>, nu: Vec<T>, b: &[T]) -> Self {
        let primal_obj = norm1(&c);
        let dual_obj: T = b.iter().zip(&nu).map(|(&x, &y)| x * y).sum();
        let cmax = norm_inf(&c);
        let cut = T::lit(1e-6) * cmax;
        let support = c
            .iter()
            .enumerate()
            .filter(|(_, &v)| cmax > T::zero() && v.abs() > cut)
            .map(|(j, _)| j)
            .collect();
        Self {
            c,
            nu,
            primal_obj,
            dual_obj,
            gap: (primal_obj - dual_obj).abs(),
            support,
        }
    }

    /// Largest violation of `A_S^T nu = sign(c_S)` over the support.
    pub fn sign_violation(&self, a: &Matrix<T>) -> T {
        let g = a.tr_matvec(&self.nu);
        self.support
            .iter()
            .map(|&j| (g[j] - self.c[j].signum()).abs())
            .fold(T::zero(), T::max)
    }

    /// `||A^T nu||_inf`.
    pub fn dual_infeasibility(&self, a: &Matrix<T>) -> T {
        norm_inf(&a.tr_matvec(&self.nu))
    }

    /// True when the gap meets `GAP_TOL * max(1, ||c||_1)`.
    pub fn gap_ok(&self) -> bool {
        self.gap <= T::lit(GAP_TOL) * T::one().max(self.primal_obj)
    }
}

/// Solves `min ||c||_1 s.t. A c = b` and returns the primal/dual pair.
pub fn basis_pursuit<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<SparseSolution<T>> {
    if b.len() != a.rows() {
        return Err(Error::Dimension(format!(
            "b has {} entries, A has {} rows",
            b.len(),
            a.rows()
        )));
    }
    a.check_finite()?;
    if let Some(pos) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: pos, col: 0 });
    }
    if b.iter().all(|&v| v == T::zero()) {
        return Ok(SparseSolution::assemble(
            vec![T::zero(); a.cols()],
            vec![T::zero(); a.rows()],
            b,
        ));
    }
    let lp = match simplex::l1_simplex(a, b, T::lit(FEAS_TOL)) {
        Ok(lp) => lp,
        Err(Error::Infeasible(r)) => return Err(Error::Infeasible(r)),
        Err(e) => compressed_l1(a, b).map_err(|_| e)?,
    };
    let sol = SparseSolution::assemble(lp.c, lp.nu, b);
    let resid: Vec<T> = a
        .matvec(&sol.c)
        .iter()
        .zip(b)
        .map(|(&p, &q)| p - q)
        .collect();
    let rn = norm2(&resid);
    let tol = T::lit(FEAS_TOL).max(T::epsilon() * T::lit(1e3)) * T::one().max(norm2(b));
    if rn > tol {
        return Err(Error::NotConverged {
            what: "basis pursuit",
            iterations: lp.iterations,
            residual: rn.to_f64_lossy(),
        });
    }
    Ok(sol)
}

/// Retries a failed solve on the row space of `a`. Nearly dependent rows of
/// a rank-deficient dictionary leave the simplex with an ill-conditioned
/// basis; projecting onto an orthonormal row basis removes them.
fn compressed_l1<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<simplex::L1Lp<T>> {
    let u = range_basis(a, T::lit(1e-10))?;
    if u.cols() == a.rows() {
        return Err(Error::Degenerate("dictionary has full row rank".into()));
    }
    let ar = u.transpose().matmul(a)?;
    let br = u.tr_matvec(b);
    let mut lp = simplex::l1_simplex(&ar, &br, T::lit(FEAS_TOL))?;
    lp.nu = u.matvec(&lp.nu);
    Ok(lp)
}

/// Optimiser of `max <a_tilde, lambda> s.t. ||A_tilde^T lambda||_inf <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualDirection<T> {
    /// Lies in the column span of `A_tilde`.
    pub lambda: Vec<T>,
    pub objective: T,
    /// Support of the matching primal basis-pursuit solution.
    pub support: Vec<usize>,
}

/// LP dual of basis pursuit. The problem is bounded exactly when `a_tilde`
/// lies in the span of `A_tilde`; the returned optimiser is the one inside
/// that span.
pub fn dual_direction<T: Real>(a_tilde: &[T], dict: &Matrix<T>) -> Result<DualDirection<T>> {
    if a_tilde.len() != dict.rows() {
        return Err(Error::Dimension(format!(
            "direction has {} entries, dictionary has {} rows",
            a_tilde.len(),
            dict.rows()
        )));
    }
    if dict.max_abs() == T::zero() {
        return Err(Error::InvalidArgument(
            "dual_direction needs a nonzero dictionary".into(),
        ));
    }
    let w = range_basis(dict, T::lit(1e-10) * T::of(dict.rows().max(dict.cols())))?;
    let coords = w.tr_matvec(a_tilde);
    let back = w.matvec(&coords);
    let off: Vec<T> = back.iter().zip(a_tilde).map(|(&p, &q)| p - q).collect();
    if norm2(&off)
        > T::lit(FEAS_TOL).max(T::epsilon() * T::lit(100.0)) * T::one().max(norm2(a_tilde))
    {
        return Err(Error::Unbounded);
    }
    let reduced = w.tr_matmul(dict)?;
    let sol = basis_pursuit(&reduced, &coords)?;
    let lambda = w.matvec(&sol.nu);
    let objective = a_tilde.iter().zip(&lambda).map(|(&x, &y)| x * y).sum();
    Ok(DualDirection {
        lambda,
        objective,
        support: sol.support,
    })
}
