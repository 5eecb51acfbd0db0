//! Matrix completion by singular value thresholding, applied cluster by
//! cluster, and subspace identification from completed clusters.

use crate::error::{Error, Result};
use crate::numkit::{sym_eig, thin_svd, Matrix};
use crate::scalar::Real;
use crate::uosgen::ObservedMatrix;

/// SVT step parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvtParams<T> {
    pub tau: T,
    pub delta: T,
    pub max_iter: usize,
    /// Stop once `||P(X - M)||_F <= conv_tol * ||P(M)||_F` on the observed set.
    pub conv_tol: T,
}

impl<T: Real> SvtParams<T> {
    /// `tau = 5 sqrt(rows cols)`, `delta = 1.2 / p`, 500 iterations, 1e-4.
    pub fn for_shape(rows: usize, cols: usize, observed_fraction: f64) -> Self {
        Self {
            tau: T::lit(5.0 * ((rows * cols) as f64).sqrt()),
            delta: T::lit(1.2 / observed_fraction.max(f64::MIN_POSITIVE)),
            max_iter: 500,
            conv_tol: T::lit(1e-4),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvtOutcome<T> {
    pub matrix: Matrix<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of singular values kept in the last shrinkage step.
    pub rank: usize,
}

/// `D_tau(y)`: singular values shrunk by `tau`. The decomposition comes from
/// the Gram matrix of the shorter side; singular values that small lose
/// accuracy there are removed by the shrinkage anyway.
fn shrink<T: Real>(y: &Matrix<T>, tau: T) -> Result<(Matrix<T>, usize)> {
    let (rows, cols) = y.shape();
    let wide = rows <= cols;
    let mut gram = if wide {
        y.matmul(&y.transpose())?
    } else {
        y.tr_matmul(y)?
    };
    let dim = gram.rows();
    for r in 0..dim {
        for c in (r + 1)..dim {
            let v = (gram[(r, c)] + gram[(c, r)]) * T::lit(0.5);
            gram[(r, c)] = v;
            gram[(c, r)] = v;
        }
    }
    let eig = sym_eig(&gram)?;
    // projector-like operator sum (1 - tau/s) v v^T on the short side
    let mut op = Matrix::zeros(dim, dim);
    let mut rank = 0;
    for (idx, &lam) in eig.values.iter().enumerate() {
        let s = lam.max(T::zero()).sqrt();
        if s <= tau {
            continue;
        }
        rank += 1;
        let f = T::one() - tau / s;
        let v = eig.vectors.col(idx);
        for r in 0..dim {
            let fr = f * v[r];
            if fr == T::zero() {
                continue;
            }
            for (dst, &vc) in op.row_mut(r).iter_mut().zip(&v) {
                *dst += fr * vc;
            }
        }
    }
    if rank == 0 {
        return Ok((Matrix::zeros(rows, cols), 0));
    }
    let x = if wide { op.matmul(y)? } else { y.matmul(&op)? };
    Ok((x, rank))
}

fn observed_norm<T: Real>(m: &Matrix<T>, mask: &[bool]) -> T {
    m.as_slice()
        .iter()
        .zip(mask)
        .filter(|(_, &o)| o)
        .map(|(&v, _)| v * v)
        .sum::<T>()
        .sqrt()
}

/// Singular value thresholding on the observed entries of `values`
/// (row-major `mask`, true = observed).
pub fn svt_complete<T: Real>(values: &Matrix<T>, mask: &[bool], params: &SvtParams<T>) -> Result<SvtOutcome<T>> {
    let (rows, cols) = values.shape();
    if mask.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "mask has {} entries for a {rows}x{cols} matrix",
            mask.len()
        )));
    }
    if !mask.iter().any(|&o| o) {
        return Err(Error::InvalidArgument("no observed entry".into()));
    }
    values.check_finite()?;
    if mask.iter().all(|&o| o) {
        let rank = thin_svd(values)?.rank(T::lit(1e-10));
        return Ok(SvtOutcome {
            matrix: values.clone(),
            iterations: 0,
            converged: true,
            rank,
        });
    }
    let pm = Matrix::from_fn(rows, cols, |r, c| {
        if mask[r * cols + c] {
            values[(r, c)]
        } else {
            T::zero()
        }
    });
    let norm_pm = observed_norm(&pm, mask);
    if norm_pm == T::zero() {
        return Ok(SvtOutcome {
            matrix: Matrix::zeros(rows, cols),
            iterations: 0,
            converged: true,
            rank: 0,
        });
    }
    // kick-start: the first iterations with a smaller multiple would all
    // shrink to zero
    let spec = thin_svd(&pm)?.s[0];
    let k0 = (params.tau / (params.delta * spec)).ceil().max(T::one());
    let mut y = pm.scale(k0 * params.delta);
    let mut x = Matrix::zeros(rows, cols);
    let mut rank = 0;
    let mut first_resid = None;
    for it in 1..=params.max_iter {
        (x, rank) = shrink(&y, params.tau)?;
        let mut resid_sq = T::zero();
        for ((yv, &xv), (&mv, &o)) in y
            .as_mut_slice()
            .iter_mut()
            .zip(x.as_slice())
            .zip(pm.as_slice().iter().zip(mask))
        {
            if o {
                let r = mv - xv;
                resid_sq += r * r;
                *yv += params.delta * r;
            }
        }
        let rel = resid_sq.sqrt() / norm_pm;
        if !rel.is_finite() {
            return Err(Error::Diverged { iterations: it });
        }
        let base = *first_resid.get_or_insert(rel);
        if rel > T::lit(1e3) * base.max(T::epsilon()) {
            return Err(Error::Diverged { iterations: it });
        }
        if rel <= params.conv_tol {
            return Ok(SvtOutcome {
                matrix: x,
                iterations: it,
                converged: true,
                rank,
            });
        }
    }
    Ok(SvtOutcome {
        matrix: x,
        iterations: params.max_iter,
        converged: false,
        rank,
    })
}

#[derive(Debug, Clone)]
pub struct CompletionResult<T> {
    pub completed: Matrix<T>,
    /// Cluster labels in ascending order; the vectors below follow it.
    pub clusters: Vec<usize>,
    pub per_cluster_rank: Vec<usize>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Divergence messages; such clusters stay zero-filled.
    pub failures: Vec<(usize, String)>,
}

/// Completes each predicted cluster separately with default SVT parameters.
pub fn complete_by_cluster<T: Real>(x: &ObservedMatrix<T>, labels: &[usize]) -> Result<CompletionResult<T>> {
    if labels.len() != x.cols() {
        return Err(Error::Dimension(format!(
            "{} labels for {} columns",
            labels.len(),
            x.cols()
        )));
    }
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    let mut completed = x.values().clone();
    let mut out = CompletionResult {
        completed: Matrix::zeros(0, 0),
        clusters: clusters.clone(),
        per_cluster_rank: Vec::new(),
        iterations: Vec::new(),
        converged: Vec::new(),
        failures: Vec::new(),
    };
    for &c in &clusters {
        let idx: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == c).collect();
        let sub = x.select_cols(&idx);
        let params = SvtParams::for_shape(sub.rows(), sub.cols(), sub.observed_fraction());
        match svt_complete(sub.values(), sub.mask(), &params) {
            Ok(res) => {
                for (k, &j) in idx.iter().enumerate() {
                    completed.set_col(j, &res.matrix.col(k));
                }
                out.per_cluster_rank.push(res.rank);
                out.iterations.push(res.iterations);
                out.converged.push(res.converged);
            }
            Err(e @ Error::Diverged { .. }) => {
                out.per_cluster_rank.push(0);
                out.iterations.push(params.max_iter);
                out.converged.push(false);
                out.failures.push((c, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    out.completed = completed;
    Ok(out)
}

/// Left singular vectors whose singular value is at least `d_tol * max(s)`.
pub fn identify_subspace<T: Real>(m: &Matrix<T>, d_tol: T) -> Result<Matrix<T>> {
    if m.max_abs() == T::zero() {
        return Err(Error::InvalidArgument(
            "cannot identify a subspace from a zero matrix".into(),
        ));
    }
    let svd = thin_svd(m)?;
    let cut = d_tol * svd.s[0];
    let keep: Vec<usize> = (0..svd.s.len()).filter(|&j| svd.s[j] >= cut).collect();
    Ok(svd.u.select_cols(&keep))
}
