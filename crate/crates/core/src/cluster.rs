//! Affinity construction for the four clustering algorithms and spectral
//! clustering of the resulting graph.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::{kmeans, norm1, norm2, top_eigenpairs, Matrix};
use crate::scalar::{round_half_away, Real};
use crate::solvers::{basis_pursuit, lasso, lasso_lambda_rule, GAP_TOL};
use crate::uosgen::ObservedMatrix;

pub type ClusterLabels = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Ewzf,
    EwzfOo,
    EwzfOoLasso,
    Tsc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Ewzf,
        Algorithm::EwzfOo,
        Algorithm::EwzfOoLasso,
        Algorithm::Tsc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ewzf => "ewzf",
            Algorithm::EwzfOo => "ewzf-oo",
            Algorithm::EwzfOoLasso => "ewzf-oo-lasso",
            Algorithm::Tsc => "tsc",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

/// Quality record of the per-column l1 solves behind an affinity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveDiagnostics {
    pub solves: usize,
    /// Columns whose solve failed, with the error text.
    pub failures: Vec<(usize, String)>,
    /// Worst `gap / max(1, ||c||_1)`.
    pub max_rel_gap: f64,
    /// Worst `|A_S^T nu - sign(c_S)|`.
    pub max_sign_violation: f64,
    /// Worst `||A^T nu||_inf`.
    pub max_dual_norm: f64,
}

impl SolveDiagnostics {
    /// True when every solve succeeded and met the gap and sign conditions.
    pub fn all_certified(&self) -> bool {
        self.failures.is_empty() && self.max_rel_gap <= GAP_TOL && self.max_sign_violation <= 1e-6
    }

    pub fn merge(&mut self, other: &SolveDiagnostics) {
        self.solves += other.solves;
        self.failures.extend(other.failures.iter().cloned());
        self.max_rel_gap = self.max_rel_gap.max(other.max_rel_gap);
        self.max_sign_violation = self.max_sign_violation.max(other.max_sign_violation);
        self.max_dual_norm = self.max_dual_norm.max(other.max_dual_norm);
    }
}

#[derive(Debug, Clone)]
pub struct Affinity<T> {
    /// Coefficient matrix; column i holds the representation of point i.
    pub coeffs: Matrix<T>,
    /// `|C| + |C|^T`.
    pub sym: Matrix<T>,
    pub diagnostics: SolveDiagnostics,
}

impl<T: Real> Affinity<T> {
    pub fn from_coeffs(coeffs: Matrix<T>, diagnostics: SolveDiagnostics) -> Self {
        let abs = coeffs.map(|v| v.abs());
        let sym = abs.add(&abs.transpose()).expect("square");
        Self {
            coeffs,
            sym,
            diagnostics,
        }
    }

    /// Row indices of the nonzero entries of column `i`.
    pub fn support(&self, i: usize) -> Vec<usize> {
        (0..self.coeffs.rows())
            .filter(|&r| self.coeffs[(r, i)] != T::zero())
            .collect()
    }
}

/// Columns whose zero-filled vector is identically zero.
pub fn zero_columns<T: Real>(x: &ObservedMatrix<T>) -> Vec<bool> {
    (0..x.cols())
        .map(|c| x.column(c).iter().all(|&v| v == T::zero()))
        .collect()
}

/// The l1 problem for column `i`: rows, dictionary column indices, the
/// dictionary itself and the right-hand side.
fn column_problem<T: Real>(
    x: &ObservedMatrix<T>,
    i: usize,
    restrict: bool,
    excluded: &[bool],
) -> (Vec<usize>, Matrix<T>, Vec<T>) {
    let z = x.values();
    let dict_cols: Vec<usize> = (0..x.cols()).filter(|&j| j != i && !excluded[j]).collect();
    let rows: Vec<usize> = if restrict {
        x.omega(i).to_vec()
    } else {
        (0..x.rows())
            .filter(|&r| {
                z[(r, i)] != T::zero() || dict_cols.iter().any(|&j| z[(r, j)] != T::zero())
            })
            .collect()
    };
    let dict = Matrix::from_fn(rows.len(), dict_cols.len(), |r, c| {
        z[(rows[r], dict_cols[c])]
    });
    let b = rows.iter().map(|&r| z[(r, i)]).collect();
    (dict_cols, dict, b)
}

fn ssc_affinity<T: Real>(
    x: &ObservedMatrix<T>,
    restrict: bool,
    lambda: Option<T>,
) -> Result<Affinity<T>> {
    let n = x.cols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "affinity needs at least two columns".into(),
        ));
    }
    let excluded = zero_columns(x);
    let mut coeffs = Matrix::zeros(n, n);
    let mut diag = SolveDiagnostics::default();
    for i in 0..n {
        if excluded[i] {
            continue;
        }
        let (dict_cols, dict, b) = column_problem(x, i, restrict, &excluded);
        diag.solves += 1;
        let solved = match lambda {
            None => basis_pursuit(&dict, &b).map(|s| {
                let scale = 1f64.max(s.primal_obj.to_f64_lossy());
                diag.max_rel_gap = diag.max_rel_gap.max(s.gap.to_f64_lossy() / scale);
                diag.max_sign_violation = diag
                    .max_sign_violation
                    .max(s.sign_violation(&dict).to_f64_lossy());
                diag.max_dual_norm = diag
                    .max_dual_norm
                    .max(s.dual_infeasibility(&dict).to_f64_lossy());
                s.c
            }),
            Some(lam) => lasso(&dict, &b, lam),
        };
        match solved {
            Ok(c) => {
                for (&j, &v) in dict_cols.iter().zip(&c) {
                    coeffs[(j, i)] = v;
                }
            }
            Err(e) => {
                warn!("column {i}: l1 solve failed ({e}); leaving its coefficients at zero");
                diag.failures.push((i, e.to_string()));
            }
        }
    }
    Ok(Affinity::from_coeffs(coeffs, diag))
}

/// Each zero-filled column against all other zero-filled columns.
pub fn affinity_ewzf<T: Real>(x: &ObservedMatrix<T>) -> Result<Affinity<T>> {
    ssc_affinity(x, false, None)
}

/// Each column against the other columns restricted to its observed rows.
pub fn affinity_ewzf_oo<T: Real>(x: &ObservedMatrix<T>) -> Result<Affinity<T>> {
    ssc_affinity(x, true, None)
}

/// LASSO version of [`affinity_ewzf_oo`]. The rule value `lambda` from
/// [`lasso_lambda_rule`] weighs the fit, `||c||_1 + lambda/2 ||b - A c||^2`,
/// so the l1 weight handed to [`lasso`] is `1 / lambda`. Every column is
/// then zero for `alpha < 1` and the result is invariant to data scaling.
pub fn affinity_ewzf_oo_lasso<T: Real>(x: &ObservedMatrix<T>, alpha: T) -> Result<Affinity<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    let lambda = lasso_lambda_rule(x, alpha)?;
    ssc_affinity(x, true, Some(lambda.recip()))
}

/// `round(sqrt(N log N))` with the natural logarithm.
pub fn default_tsc_q(points_per_cluster: usize) -> usize {
    let n = points_per_cluster as f64;
    round_half_away((n * n.ln()).sqrt()).max(1)
}

/// Thresholded correlations: each column keeps its `q` largest absolute
/// correlations with other (normalised, zero-filled) columns.
pub fn affinity_tsc<T: Real>(x: &ObservedMatrix<T>, q: usize) -> Result<Affinity<T>> {
    let n = x.cols();
    if q == 0 || q >= n {
        return Err(Error::InvalidArgument(format!("q = {q} not in 1..{n}")));
    }
    let excluded = zero_columns(x);
    let unit: Vec<Vec<T>> = (0..n)
        .map(|c| {
            let v = x.column(c);
            let nrm = norm2(&v);
            if nrm > T::zero() {
                v.iter().map(|&e| e / nrm).collect()
            } else {
                v
            }
        })
        .collect();
    let mut coeffs = Matrix::zeros(n, n);
    for i in 0..n {
        if excluded[i] {
            continue;
        }
        let mut cand: Vec<(usize, T)> = (0..n)
            .filter(|&j| j != i && !excluded[j])
            .map(|j| (j, crate::numkit::dot(&unit[i], &unit[j]).abs()))
            .collect();
        cand.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for &(j, v) in cand.iter().take(q) {
            coeffs[(j, i)] = v;
        }
    }
    Ok(Affinity::from_coeffs(coeffs, SolveDiagnostics::default()))
}

/// Normalised spectral clustering of a symmetric nonnegative affinity.
pub fn spectral_cluster<T: Real>(aff: &Matrix<T>, l: usize, seed: u64) -> Result<ClusterLabels> {
    let n = aff.rows();
    if l == 0 {
        return Err(Error::InvalidArgument("need at least one cluster".into()));
    }
    if aff.cols() != n {
        return Err(Error::Dimension(format!(
            "affinity must be square, got {:?}",
            aff.shape()
        )));
    }
    if l == 1 {
        return Ok(vec![0; n]);
    }
    if n < l {
        return Err(Error::InvalidArgument(format!(
            "{n} points cannot form {l} clusters"
        )));
    }
    let dinv: Vec<T> = (0..n)
        .map(|i| {
            let d: T = aff.row(i).iter().copied().sum();
            if d > T::zero() {
                T::one() / d.sqrt()
            } else {
                T::zero()
            }
        })
        .collect();
    // Smallest eigenvectors of I - D^-1/2 A D^-1/2 are the largest of the
    // normalised affinity.
    let m = Matrix::from_fn(n, n, |i, j| dinv[i] * aff[(i, j)] * dinv[j]);
    let eig = top_eigenpairs(&m, l, seed)?;
    let mut emb = eig.vectors;
    for r in 0..n {
        let row = emb.row_mut(r);
        let nrm = norm2(row);
        if nrm > T::lit(1e-12) {
            row.iter_mut().for_each(|v| *v /= nrm);
        } else {
            row.iter_mut().for_each(|v| *v = T::zero());
        }
    }
    kmeans(&emb, l, 20, seed)
}

/// Tuning parameters shared by the algorithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub alpha: f64,
    pub q: usize,
}

pub fn build_affinity<T: Real>(
    x: &ObservedMatrix<T>,
    algo: Algorithm,
    params: &ClusterParams,
) -> Result<Affinity<T>> {
    match algo {
        Algorithm::Ewzf => affinity_ewzf(x),
        Algorithm::EwzfOo => affinity_ewzf_oo(x),
        Algorithm::EwzfOoLasso => affinity_ewzf_oo_lasso(x, T::lit(params.alpha)),
        Algorithm::Tsc => affinity_tsc(x, params.q),
    }
}

/// Full pipeline: affinity, spectral clustering, and uniform random labels
/// for columns with no observed nonzero entry.
pub fn cluster<T: Real>(
    x: &ObservedMatrix<T>,
    algo: Algorithm,
    params: &ClusterParams,
    l: usize,
    seed: u64,
) -> Result<(ClusterLabels, Affinity<T>)> {
    let aff = build_affinity(x, algo, params)?;
    let mut labels = spectral_cluster(&aff.sym, l, seed)?;
    let zeros = zero_columns(x);
    if zeros.iter().any(|&z| z) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        for (i, _) in zeros.iter().enumerate().filter(|(_, &z)| z) {
            labels[i] = rng.random_range(0..l);
        }
        warn!(
            "{} all-zero columns given random labels",
            zeros.iter().filter(|&&z| z).count()
        );
    }
    Ok((labels, aff))
}

/// l1 norm of the coefficients falling outside the true cluster of each
/// column, relative to the total l1 norm.
pub fn off_cluster_mass<T: Real>(aff: &Affinity<T>, truth: &[usize]) -> f64 {
    let n = aff.coeffs.cols();
    let mut off = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let col = aff.coeffs.col(i);
        total += norm1(&col).to_f64_lossy();
        off += (0..n)
            .filter(|&j| truth[j] != truth[i])
            .map(|j| col[j].abs().to_f64_lossy())
            .sum::<f64>();
    }
    if total > 0.0 {
        off / total
    } else {
        0.0
    }
}
