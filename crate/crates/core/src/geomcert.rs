//! Centro-symmetric polytope geometry and deterministic success conditions
//! for the zero-filling SSC variants.
//!
//! `P(G) = conv(+-g_1, ..., +-g_k)` has polar `{z : ||G^T z||_inf <= 1}` and
//! `r(P) * R(P polar) = 1`, so inradii are reciprocals of polar
//! circumradii. Small polars are solved exactly by vertex enumeration; larger
//! ones get a sampled lower bound and a singular-value upper bound.
//!
//! Inradii are measured inside the span of the generators. A dictionary
//! spanning only part of the ambient space would otherwise always have
//! inradius zero, while the dual directions of interest live in that span.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numkit::{default_rank_tol, norm2, pinv, range_basis, spectral_norm, thin_svd, Lu, Matrix};
use crate::scalar::Real;
use crate::solvers::{basis_pursuit, dual_direction};
use crate::uosgen::{restrict_rows, truncated_basis_svd, ObservedMatrix, UosModel};

pub const EXACT_MAX_DIM: usize = 6;
pub const EXACT_MAX_GENERATORS: usize = 14;
pub const SAMPLE_DIRECTIONS: usize = 2000;
pub const ALPHA_GRID: usize = 101;

const SAMPLE_SEED: u64 = 0x9e37_79b9;

/// `conv(+-g_1, ..., +-g_k)` for the columns `g_j` of the generator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope<T> {
    generators: Matrix<T>,
}

impl<T: Real> Polytope<T> {
    pub fn new(generators: Matrix<T>) -> Result<Self> {
        if generators.cols() == 0 || generators.rows() == 0 {
            return Err(Error::InvalidArgument(
                "a polytope needs at least one generator".into(),
            ));
        }
        generators.check_finite()?;
        Ok(Self { generators })
    }

    pub fn generators(&self) -> &Matrix<T> {
        &self.generators
    }

    pub fn ambient_dim(&self) -> usize {
        self.generators.rows()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.cols()
    }

    /// Orthonormal basis of the generators' span.
    pub fn span_basis(&self) -> Result<Matrix<T>> {
        if self.generators.max_abs() == T::zero() {
            return Ok(Matrix::zeros(self.ambient_dim(), 0));
        }
        range_basis(&self.generators, default_rank_tol(&self.generators))
    }

    pub fn spans_ambient(&self) -> Result<bool> {
        Ok(self.span_basis()?.cols() == self.ambient_dim())
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            generators: self.generators.scale(s),
        }
    }
}

/// Two-sided bound on a radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusEstimate<T> {
    pub lower: T,
    /// `+inf` when no finite bound is known.
    pub upper: T,
    pub exact: bool,
    /// Dimension of the space the radius was measured in.
    pub span_dim: usize,
}

impl<T: Real> RadiusEstimate<T> {
    fn exact(value: T, span_dim: usize) -> Self {
        Self {
            lower: value,
            upper: value,
            exact: true,
            span_dim,
        }
    }

    pub fn value(&self) -> Option<T> {
        self.exact.then_some(self.lower)
    }
}

/// Calls `f` on every `m`-subset of `0..k` in lexicographic order.
fn for_each_subset(k: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m > k {
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        f(&idx);
        let mut p = m;
        while p > 0 && idx[p - 1] == k - m + p - 1 {
            p -= 1;
        }
        if p == 0 {
            return;
        }
        idx[p - 1] += 1;
        for q in p..m {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Largest-norm vertex of `{z : ||G^T z||_inf <= 1}` by enumerating every
/// choice of `m` active constraints and sign pattern. `G` must have full
/// row rank.
fn polar_vertex_max<T: Real>(g: &Matrix<T>) -> Result<(T, Vec<T>)> {
    let (m, k) = g.shape();
    let gmax = g.max_abs();
    let mut best = T::zero();
    let mut arg = vec![T::zero(); m];
    let mut sys = Matrix::zeros(m, m);
    for_each_subset(k, m, |sub| {
        for (r, &j) in sub.iter().enumerate() {
            for c in 0..m {
                sys[(r, c)] = g[(c, j)];
            }
        }
        let Some(lu) = Lu::factor(&sys, T::lit(1e-12)) else {
            return;
        };
        // z and -z give the same norm, so the first sign is fixed
        for pattern in 0..(1usize << (m - 1)) {
            let s: Vec<T> = (0..m)
                .map(|r| {
                    if r > 0 && pattern & (1 << (r - 1)) != 0 {
                        -T::one()
                    } else {
                        T::one()
                    }
                })
                .collect();
            let z = lu.solve(&s);
            let nz = norm2(&z);
            if nz <= best {
                continue;
            }
            let slack = T::lit(1e-9) + T::epsilon() * T::lit(10.0) * T::of(k) * gmax * nz;
            let feasible = (0..k).all(|j| {
                let v: T = (0..m).map(|r| g[(r, j)] * z[r]).sum();
                v.abs() <= T::one() + slack
            });
            if feasible {
                best = nz;
                arg = z;
            }
        }
    });
    if best == T::zero() {
        return Err(Error::Degenerate("polar polyhedron has no vertex".into()));
    }
    Ok((best, arg))
}

/// Largest `||z||` over the LP maximisers of `<u, z>` on the polar, one LP
/// per direction `u`. A lower bound on the polar circumradius.
pub fn polar_radius_from_directions<T: Real>(p: &Polytope<T>, directions: &[Vec<T>]) -> Result<T> {
    let g = p.generators();
    let mut best = T::zero();
    for u in directions {
        let sol = basis_pursuit(g, u)?;
        best = best.max(norm2(&sol.nu));
    }
    Ok(best)
}

fn sphere_directions<T: Real>(dim: usize, count: usize) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|&x| T::lit(x / n)).collect()
        })
        .collect()
}

/// Circumradius of the polar set, `max ||z|| s.t. ||G^T z||_inf <= 1`, in
/// the ambient space of the generators.
pub fn circumradius_polar<T: Real>(p: &Polytope<T>) -> Result<RadiusEstimate<T>> {
    let g = p.generators();
    let (m, k) = g.shape();
    let svd = thin_svd(g)?;
    if k < m || svd.rank(default_rank_tol(g)) < m {
        return Err(Error::Unbounded);
    }
    if m <= EXACT_MAX_DIM && k <= EXACT_MAX_GENERATORS {
        let (r, _) = polar_vertex_max(g)?;
        return Ok(RadiusEstimate::exact(r, m));
    }
    let lower = polar_radius_from_directions(p, &sphere_directions(m, SAMPLE_DIRECTIONS))?;
    // ||G^T z||_2 <= sqrt(k) on the polar
    let upper = T::of(k).sqrt() / svd.s[m - 1];
    Ok(RadiusEstimate {
        lower,
        upper: upper.max(lower),
        exact: false,
        span_dim: m,
    })
}

/// Inradius of `P` inside the span of its generators.
pub fn inradius<T: Real>(p: &Polytope<T>) -> Result<RadiusEstimate<T>> {
    let w = p.span_basis()?;
    let dim = w.cols();
    if dim == 0 {
        return Ok(RadiusEstimate::exact(T::zero(), 0));
    }
    let reduced = Polytope::new(w.tr_matmul(p.generators())?)?;
    let big = circumradius_polar(&reduced)?;
    let lower = if big.upper.is_finite() {
        T::one() / big.upper
    } else {
        T::zero()
    };
    Ok(RadiusEstimate {
        lower,
        upper: T::one() / big.lower,
        exact: big.exact,
        span_dim: dim,
    })
}

/// One left-hand-side value of a success condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompetitorEntry<T> {
    /// Competing subspace.
    pub k: usize,
    /// Position of the point within subspace `k`.
    pub j: usize,
    pub lhs: T,
}

/// Outcome of a deterministic condition for point `i` of subspace `ell`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport<T> {
    pub ell: usize,
    pub i: usize,
    pub entries: Vec<CompetitorEntry<T>>,
    pub inradius: RadiusEstimate<T>,
    /// `margin > 0`, using the inradius lower bound.
    pub holds: bool,
    pub margin: T,
    /// Dual direction the left-hand sides were evaluated with.
    pub lambda: Vec<T>,
    /// True when the dual optimum is provably unique. Otherwise another
    /// optimal direction may give different left-hand sides.
    pub dual_unique: bool,
    /// Set when the dual direction could not be computed.
    pub failure: Option<String>,
}

impl<T: Real> CertificateReport<T> {
    pub fn max_lhs(&self) -> T {
        self.entries.iter().fold(T::zero(), |a, e| a.max(e.lhs))
    }
}

fn certify<T: Real>(
    ell: usize,
    i: usize,
    subject: &[T],
    dict: Matrix<T>,
    competitors: Vec<(usize, usize, Vec<T>)>,
) -> Result<CertificateReport<T>> {
    let poly = Polytope::new(dict)?;
    let inr = inradius(&poly)?;
    let dict = poly.generators();
    let (lambda, dual_unique, failure) = match dual_direction(subject, dict) {
        Ok(dd) => {
            let unique = if dd.support.is_empty() {
                inr.span_dim == 0
            } else {
                let sub = dict.select_cols(&dd.support);
                thin_svd(&sub)?.rank(default_rank_tol(&sub)) == inr.span_dim
            };
            (dd.lambda, unique, None)
        }
        Err(e) => (vec![T::nan(); subject.len()], false, Some(e.to_string())),
    };
    let nl = norm2(&lambda);
    let entries: Vec<CompetitorEntry<T>> = competitors
        .into_iter()
        .map(|(k, j, v)| {
            let lhs = if failure.is_some() {
                T::nan()
            } else if nl == T::zero() {
                T::zero()
            } else {
                (lambda.iter().zip(&v).map(|(&a, &b)| a * b).sum::<T>() / nl).abs()
            };
            CompetitorEntry { k, j, lhs }
        })
        .collect();
    let margin = if failure.is_some() {
        T::nan()
    } else {
        inr.lower - entries.iter().fold(T::zero(), |a, e| a.max(e.lhs))
    };
    Ok(CertificateReport {
        ell,
        i,
        entries,
        inradius: inr,
        holds: failure.is_none() && margin > T::zero(),
        margin,
        lambda,
        dual_unique,
        failure,
    })
}

fn subject_column<T: Real>(model: &UosModel<T>, ell: usize, i: usize) -> Result<usize> {
    if ell >= model.num_subspaces() {
        return Err(Error::InvalidArgument(format!(
            "subspace {ell} out of range ({} subspaces)",
            model.num_subspaces()
        )));
    }
    let members = model.members(ell);
    if members.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "subspace {ell} needs at least two points"
        )));
    }
    members.get(i).copied().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "point {i} out of range ({} points in subspace {ell})",
            members.len()
        ))
    })
}

fn check_shapes<T: Real>(model: &UosModel<T>, x: &ObservedMatrix<T>) -> Result<()> {
    if x.rows() != model.n || x.cols() != model.num_points() {
        return Err(Error::Dimension(format!(
            "observed matrix is {}x{}, model is {}x{}",
            x.rows(),
            x.cols(),
            model.n,
            model.num_points()
        )));
    }
    Ok(())
}

fn zero_outside<T: Real>(v: &mut [T], omega: &[usize]) {
    let mut keep = vec![false; v.len()];
    omega.iter().for_each(|&r| keep[r] = true);
    v.iter_mut()
        .zip(keep)
        .filter(|(_, k)| !k)
        .for_each(|(x, _)| *x = T::zero());
}

/// Rotated columns `Q_i^T f(x_c)` for the subject, the in-subspace
/// dictionary and every competing point.
fn rotated_problem<T: Real>(
    model: &UosModel<T>,
    x: &ObservedMatrix<T>,
    ell: usize,
    i: usize,
    restrict: bool,
) -> Result<(Vec<T>, Matrix<T>, Vec<(usize, usize, Vec<T>)>)> {
    check_shapes(model, x)?;
    let col = subject_column(model, ell, i)?;
    let omega = x.omega(col).to_vec();
    let d = model.dims[ell];
    if omega.len() < d {
        return Err(Error::AssumptionViolated(format!(
            "point {i} of subspace {ell} has {} observed entries, fewer than d = {d}",
            omega.len()
        )));
    }
    let q = truncated_basis_svd(model, &omega, ell)?.q;
    let tilde = |c: usize| {
        let mut v = x.column(c);
        if restrict {
            zero_outside(&mut v, &omega);
        }
        q.tr_matvec(&v)
    };
    let subject = tilde(col);
    let dict_cols: Vec<Vec<T>> = model
        .members(ell)
        .into_iter()
        .filter(|&c| c != col)
        .map(tilde)
        .collect();
    let dict = Matrix::from_cols(&dict_cols)?;
    let mut competitors = Vec::new();
    for k in (0..model.num_subspaces()).filter(|&k| k != ell) {
        for (j, c) in model.members(k).into_iter().enumerate() {
            competitors.push((k, j, tilde(c)));
        }
    }
    Ok((subject, dict, competitors))
}

/// Success condition for the overlapping-observation variant: dictionary
/// columns `Q_i^T I_{Omega_i} I_{Omega_j} U a_j`.
pub fn check_thm_oo<T: Real>(
    model: &UosModel<T>,
    x: &ObservedMatrix<T>,
    ell: usize,
    i: usize,
) -> Result<CertificateReport<T>> {
    let (subject, dict, competitors) = rotated_problem(model, x, ell, i, true)?;
    certify(ell, i, &subject, dict, competitors)
}

/// Success condition for plain zero-filling: dictionary columns
/// `Q_i^T V_{Omega_j} a_j`.
pub fn check_thm_ewzf<T: Real>(
    model: &UosModel<T>,
    x: &ObservedMatrix<T>,
    ell: usize,
    i: usize,
) -> Result<CertificateReport<T>> {
    let (subject, dict, competitors) = rotated_problem(model, x, ell, i, false)?;
    certify(ell, i, &subject, dict, competitors)
}

fn coefficient_problem<T: Real>(
    model: &UosModel<T>,
    ell: usize,
    i: usize,
    map: impl Fn(usize) -> Result<Matrix<T>>,
) -> Result<CertificateReport<T>> {
    subject_column(model, ell, i)?;
    let a = &model.coeffs[ell];
    let subject = a.col(i);
    let keep: Vec<usize> = (0..a.cols()).filter(|&j| j != i).collect();
    let dict = a.select_cols(&keep);
    let mut competitors = Vec::new();
    for k in (0..model.num_subspaces()).filter(|&k| k != ell) {
        let mk = map(k)?;
        let ak = &model.coeffs[k];
        for j in 0..ak.cols() {
            competitors.push((k, j, mk.matvec(&ak.col(j))));
        }
    }
    certify(ell, i, &subject, dict, competitors)
}

fn restricted_pinv<T: Real>(model: &UosModel<T>, omega: &[usize], ell: usize) -> Result<Matrix<T>> {
    let v = restrict_rows(&model.bases[ell], omega);
    let d = model.dims[ell];
    let svd = thin_svd(&v)?;
    if svd.rank(default_rank_tol(&v)) < d {
        return Err(Error::AssumptionViolated(format!(
            "restricted basis of subspace {ell} is rank deficient"
        )));
    }
    pinv(&v, default_rank_tol(&v))
}

/// Success condition when every point is observed on the same coordinates:
/// `|lambda^T (V_ell)^+ V_k a_j| / ||lambda|| < r(P(A_-i))`, with the dual
/// direction computed in coefficient space.
pub fn check_thm_same_location<T: Real>(
    model: &UosModel<T>,
    x: &ObservedMatrix<T>,
    ell: usize,
    i: usize,
) -> Result<CertificateReport<T>> {
    check_shapes(model, x)?;
    if !x.is_same_location() {
        return Err(Error::InvalidArgument(
            "the same-location condition needs a common observation set".into(),
        ));
    }
    let omega = x.omega(0).to_vec();
    if omega.len() < model.dims[ell] {
        return Err(Error::AssumptionViolated(format!(
            "{} observed coordinates, fewer than d = {}",
            omega.len(),
            model.dims[ell]
        )));
    }
    let pinv_ell = restricted_pinv(model, &omega, ell)?;
    coefficient_problem(model, ell, i, |k| {
        pinv_ell.matmul(&restrict_rows(&model.bases[k], &omega))
    })
}

/// The fully observed condition `|lambda^T U_ell^T U_k a_j| / ||lambda||
/// < r(P(A_-i))`.
pub fn corollary1<T: Real>(model: &UosModel<T>, ell: usize, i: usize) -> Result<CertificateReport<T>> {
    let ut = model.bases[ell].transpose();
    coefficient_problem(model, ell, i, |k| ut.matmul(&model.bases[k]))
}

/// Worst-case spectral-norm test for a point observed on exactly `d`
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase<T> {
    /// `max ||Q_i^T V_{Omega_ij}^(k)||_2 ||a_j||` over competitors.
    pub bound_lhs: T,
    pub inradius: RadiusEstimate<T>,
    pub holds: bool,
}

/// Everything the worst-case conditions need, in the coordinates of
/// `Omega_i`.
struct Restricted<T> {
    q: Matrix<T>,
    dict: Matrix<T>,
    /// `(||a_j||, rows Omega_i of I_{Omega_j} U_k)` per competitor.
    blocks: Vec<(T, Matrix<T>)>,
}

fn restricted_problem<T: Real>(
    model: &UosModel<T>,
    x: &ObservedMatrix<T>,
    ell: usize,
    i: usize,
) -> Result<Restricted<T>> {
    check_shapes(model, x)?;
    let col = subject_column(model, ell, i)?;
    let omega = x.omega(col).to_vec();
    let d = model.dims[ell];
    let vi = model.bases[ell].select_rows(&omega);
    let svd = thin_svd(&vi)?;
    if vi.rows() < d || svd.rank(default_rank_tol(&vi)) < d {
        return Err(Error::AssumptionViolated(format!(
            "Q_i of point {i} in subspace {ell} does not have full column rank"
        )));
    }
    let q = svd.u.select_cols(&(0..d).collect::<Vec<_>>());
    let rows = |c: usize| -> Vec<T> { omega.iter().map(|&r| x.values()[(r, c)]).collect() };
    let dict_cols: Vec<Vec<T>> = model
        .members(ell)
        .into_iter()
        .filter(|&c| c != col)
        .map(rows)
        .collect();
    let mut blocks = Vec::new();
    for k in (0..model.num_subspaces()).filter(|&k| k != ell) {
        for (j, c) in model.members(k).into_iter().enumerate() {
            let oj = x.omega(c);
            let uk = &model.bases[k];
            let block = Matrix::from_fn(omega.len(), uk.cols(), |r, s| {
                if oj.binary_search(&omega[r]).is_ok() {
                    uk[(omega[r], s)]
                } else {
                    T::zero()
                }
            });
            blocks.push((norm2(&model.coeffs[k].col(j)), block));
        }
    }
    Ok(Restricted {
        q,
        dict: Matrix::from_cols(&dict_cols)?,
        blocks,
    })
}

/// Spectral-norm test for `|Omega_i| = d`.
pub fn check_case2_worst<T: Real>(
    model: &UosModel<T>,
    x: &ObservedMatrix<T>,
    ell: usize,
    i: usize,
) -> Result<WorstCase<T>> {
    let col = subject_column(model, ell, i)?;
    check_shapes(model, x)?;
    if x.omega(col).len() != model.dims[ell] {
        return Err(Error::AssumptionViolated(format!(
            "point {i} of subspace {ell} has {} observed entries, the test needs exactly d = {}",
            x.omega(col).len(),
            model.dims[ell]
        )));
    }
    let prob = restricted_problem(model, x, ell, i)?;
    let inr = inradius(&Polytope::new(prob.dict)?)?;
    let mut bound = T::zero();
    for (na, v) in &prob.blocks {
        bound = bound.max(spectral_norm(&prob.q.tr_matmul(v)?)? * *na);
    }
    Ok(WorstCase {
        bound_lhs: bound,
        inradius: inr,
        holds: bound < inr.lower,
    })
}

/// Two-term worst-case test for `|Omega_i| >= d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCase<T> {
    /// `max ||Q^T V||_2 ||a_j||`.
    pub coherence: T,
    /// `max ||P_W (I - Q Q^T) V||_2 ||a_j||`, `W` the dictionary span.
    pub residual: T,
    pub inradius: RadiusEstimate<T>,
    pub alpha: T,
    pub holds: bool,
    /// Grid point maximising the smaller of the two slacks.
    pub best_alpha: T,
    pub best_margin: T,
    pub holds_at_best: bool,
}

fn split_holds<T: Real>(alpha: T, r: T, coh: T, res: T) -> bool {
    coh < alpha * r && res <= (T::one() - alpha) * r
}

/// Splits the dual certificate into its component along `range(Q_i)` and
/// the rest, bounding each by a fraction of the inradius.
pub fn check_case3_worst<T: Real>(
    model: &UosModel<T>,
    x: &ObservedMatrix<T>,
    ell: usize,
    i: usize,
    alpha: T,
) -> Result<SplitCase<T>> {
    if !(T::zero()..=T::one()).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} not in [0, 1]")));
    }
    let prob = restricted_problem(model, x, ell, i)?;
    let poly = Polytope::new(prob.dict)?;
    let inr = inradius(&poly)?;
    let w = poly.span_basis()?;
    let (mut coh, mut res) = (T::zero(), T::zero());
    for (na, v) in &prob.blocks {
        let qv = prob.q.tr_matmul(v)?;
        coh = coh.max(spectral_norm(&qv)? * *na);
        let off = v.sub(&prob.q.matmul(&qv)?)?;
        res = res.max(spectral_norm(&w.tr_matmul(&off)?)? * *na);
    }
    let r = inr.lower;
    let mut best = (T::zero(), T::neg_infinity());
    for t in 0..ALPHA_GRID {
        let a = T::of(t) / T::of(ALPHA_GRID - 1);
        let m = (a * r - coh).min((T::one() - a) * r - res);
        if m > best.1 {
            best = (a, m);
        }
    }
    Ok(SplitCase {
        coherence: coh,
        residual: res,
        inradius: inr,
        alpha,
        holds: split_holds(alpha, r, coh, res),
        best_alpha: best.0,
        best_margin: best.1,
        holds_at_best: split_holds(best.0, r, coh, res),
    })
}

/// Coordinate-restricted coherence `||(V_ell)^+ V_k||_F / d`.
pub fn expected_coherence<T: Real>(
    model: &UosModel<T>,
    omega: &[usize],
    ell: usize,
    k: usize,
) -> Result<T> {
    let m = restricted_pinv(model, omega, ell)?.matmul(&restrict_rows(&model.bases[k], omega))?;
    Ok(m.frobenius_norm() / T::of(model.dims[ell]))
}

/// `E|u_1|` for `u` uniform on the unit sphere of `R^d`.
pub fn sphere_abs_mean(d: usize) -> f64 {
    assert!(d >= 1);
    let mut c = if d % 2 == 1 { 1.0 } else { 2.0 / std::f64::consts::PI };
    let mut e = if d % 2 == 1 { 1 } else { 2 };
    while e < d {
        c *= e as f64 / (e + 1) as f64;
        e += 2;
    }
    c
}

/// Mean of `|u^T M a|`, `M = (V_ell)^+ V_k`, for unit `u`, `a` uniform on
/// their spheres, as a fixed multiple of [`expected_coherence`].
///
/// The mean is `E|u_1| * E||M a||`, and `E||M a||` lies between the rank-one
/// value `E|a_1| ||M||_F` and the isotropic value `||M||_F / sqrt(d_k)`
/// whatever the spectrum of `M`. The midpoint of that range is returned, so
/// the relative error is at most `(1 - r) / (1 + r)` with
/// `r = E|a_1| sqrt(d_k)` (0.072 for `d_k = 3`).
pub fn coherence_prediction<T: Real>(
    model: &UosModel<T>,
    omega: &[usize],
    ell: usize,
    k: usize,
) -> Result<T> {
    let (dl, dk) = (model.dims[ell], model.dims[k]);
    let r = sphere_abs_mean(dk) * (dk as f64).sqrt();
    let kappa = sphere_abs_mean(dl) * dl as f64 / (dk as f64).sqrt() * (1.0 + r) / 2.0;
    Ok(expected_coherence(model, omega, ell, k)? * T::lit(kappa))
}

/// The two normalised dual norms of the same-location argument. The
/// argument assumes they coincide; `ratio` shows how far apart they are.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaDiagnostic<T> {
    /// `||lambda_tilde|| * r(P(V_ell A_-i))`.
    pub beta1: T,
    /// `||V_ell^T lambda_tilde|| * r(P(A_-i))`.
    pub beta2: T,
    pub ratio: T,
    /// Both inradii exact.
    pub exact: bool,
}

/// Computes both betas, using inradius upper bounds when an inradius is
/// not exact.
pub fn beta_ratio<T: Real>(
    model: &UosModel<T>,
    x: &ObservedMatrix<T>,
    ell: usize,
    i: usize,
) -> Result<BetaDiagnostic<T>> {
    check_shapes(model, x)?;
    subject_column(model, ell, i)?;
    if !x.is_same_location() {
        return Err(Error::InvalidArgument(
            "the beta diagnostic needs a common observation set".into(),
        ));
    }
    let v = restrict_rows(&model.bases[ell], x.omega(0));
    let a = &model.coeffs[ell];
    let keep: Vec<usize> = (0..a.cols()).filter(|&j| j != i).collect();
    let dict = a.select_cols(&keep);
    let bar = dual_direction(&a.col(i), &dict)?.lambda;
    let vt = v.transpose();
    let tilde = pinv(&vt, default_rank_tol(&vt))?.matvec(&bar);
    let r1 = inradius(&Polytope::new(v.matmul(&dict)?)?)?;
    let r2 = inradius(&Polytope::new(dict)?)?;
    let beta1 = norm2(&tilde) * r1.upper;
    let beta2 = norm2(&vt.matvec(&tilde)) * r2.upper;
    Ok(BetaDiagnostic {
        beta1,
        beta2,
        ratio: beta1 / beta2,
        exact: r1.exact && r2.exact,
    })
}

/// CSV text with one row per competitor entry; a report without entries
/// gets one row with empty `k` and `j`.
pub fn certificate_csv<T: Real>(reports: &[CertificateReport<T>]) -> String {
    let mut out = String::from("ell,i,k,j,lhs,inradius_lower,inradius_upper,exact,holds,margin\n");
    for r in reports {
        let tail = |out: &mut String| {
            let _ = writeln!(
                out,
                ",{},{},{},{},{}",
                r.inradius.lower, r.inradius.upper, r.inradius.exact, r.holds, r.margin
            );
        };
        if r.entries.is_empty() {
            let _ = write!(out, "{},{},,,", r.ell, r.i);
            tail(&mut out);
        }
        for e in &r.entries {
            let _ = write!(out, "{},{},{},{},{}", r.ell, r.i, e.k, e.j, e.lhs);
            tail(&mut out);
        }
    }
    out
}

pub fn write_certificate_report<T: Real>(
    path: impl AsRef<Path>,
    reports: &[CertificateReport<T>],
) -> Result<()> {
    std::fs::write(path, certificate_csv(reports))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::sym_eig;
    use crate::uosgen::{generate_model, sample, GenerationMode, SamplingPattern, SamplingSpec};
    use rand::Rng;

    fn random_unit_cols(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        let mut g = Matrix::from_fn(m, k, |_, _| rng.random_range(-1.0..1.0));
        for c in 0..k {
            let col = g.col(c);
            let n = norm2(&col);
            g.set_col(c, &col.iter().map(|v| v / n).collect::<Vec<_>>());
        }
        g
    }

    /// `min_u max_j |g_j^T u|`: the minimum sits where `m` of the curves
    /// `|g_j^T u|` tie, so `u` is normal to `m - 1` vectors `g_a -+ g_b`.
    fn support_min(g: &Matrix<f64>) -> f64 {
        let (m, k) = g.shape();
        let cols = g.columns();
        let h = |u: &[f64]| cols.iter().map(|c| dot3(c, u).abs()).fold(0.0, f64::max);
        let mut diffs = Vec::new();
        for a in 0..k {
            for b in (a + 1)..k {
                for s in [1.0, -1.0] {
                    diffs.push((0..m).map(|r| cols[a][r] - s * cols[b][r]).collect::<Vec<f64>>());
                }
            }
        }
        let mut best = f64::INFINITY;
        match m {
            2 => {
                for d in &diffs {
                    let u = [-d[1], d[0]];
                    let n = (u[0] * u[0] + u[1] * u[1]).sqrt();
                    if n > 1e-12 {
                        best = best.min(h(&[u[0] / n, u[1] / n]));
                    }
                }
            }
            3 => {
                for p in 0..diffs.len() {
                    for q in (p + 1)..diffs.len() {
                        let (x, y) = (&diffs[p], &diffs[q]);
                        let u = [
                            x[1] * y[2] - x[2] * y[1],
                            x[2] * y[0] - x[0] * y[2],
                            x[0] * y[1] - x[1] * y[0],
                        ];
                        let n = norm2(&u);
                        if n > 1e-9 {
                            best = best.min(h(&u.map(|v| v / n)));
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        best
    }

    fn dot3(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn unit_square_polar() {
        let p = Polytope::new(Matrix::<f64>::identity(2)).unwrap();
        let r = circumradius_polar(&p).unwrap();
        assert!(r.exact);
        assert!((r.lower - 2f64.sqrt()).abs() < 1e-12);
        let inr = inradius(&p).unwrap();
        assert!((inr.lower - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional() {
        let p = Polytope::new(Matrix::from_rows(&[vec![1.0f64]]).unwrap()).unwrap();
        assert_eq!(circumradius_polar(&p).unwrap().value(), Some(1.0));
    }

    #[test]
    fn rotated_square_has_unit_inradius() {
        let g = Matrix::from_rows(&[vec![1.0f64, 1.0], vec![1.0, -1.0]]).unwrap();
        let r = inradius(&Polytope::new(g).unwrap()).unwrap();
        assert!((r.lower - 1.0).abs() < 1e-12 && r.exact);
    }

    #[test]
    fn polar_of_rank_deficient_generators_is_unbounded() {
        let g = Matrix::from_rows(&[vec![1.0f64, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(circumradius_polar(&Polytope::new(g).unwrap()), Err(Error::Unbounded));
    }

    #[test]
    fn sampling_through_vertex_direction_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_unit_cols(2, 5, &mut rng);
            let (exact, v) = polar_vertex_max(&g).unwrap();
            let p = Polytope::new(g).unwrap();
            let mut dirs = sphere_directions::<f64>(2, 5);
            dirs.push(v.iter().map(|x| x / exact).collect());
            let sampled = polar_radius_from_directions(&p, &dirs).unwrap();
            assert!((sampled - exact).abs() < 1e-6, "{sampled} vs {exact}");
        }
    }

    #[test]
    fn sampled_mode_brackets_exact_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_unit_cols(3, 16, &mut rng);
        let exact = polar_vertex_max(&g).unwrap().0;
        let est = circumradius_polar(&Polytope::new(g).unwrap()).unwrap();
        assert!(!est.exact);
        assert!(est.lower <= exact + 1e-9 && exact <= est.upper + 1e-9);
        assert!(est.lower > 0.95 * exact);
    }

    #[test]
    fn inradius_times_polar_radius_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..40 {
            let m = 2 + t % 2;
            let k = rng.random_range(3..=8);
            let g = random_unit_cols(m, k, &mut rng);
            let direct = support_min(&g);
            let p = Polytope::new(g).unwrap();
            let big = circumradius_polar(&p).unwrap();
            assert!((direct * big.lower - 1.0).abs() < 1e-9, "m={m} k={k}");
            assert!((inradius(&p).unwrap().lower - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_and_removal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let g = random_unit_cols(3, 7, &mut rng);
            let p = Polytope::new(g.clone()).unwrap();
            let r = inradius(&p).unwrap().lower;
            let rs = inradius(&p.scaled(2.5)).unwrap().lower;
            assert!((rs - 2.5 * r).abs() < 1e-9);
            let fewer = Polytope::new(g.select_cols(&[0, 1, 2, 3, 4, 5])).unwrap();
            assert!(inradius(&fewer).unwrap().lower <= r + 1e-12);
        }
    }

    #[test]
    fn inradius_is_measured_in_the_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g2 = random_unit_cols(2, 5, &mut rng);
        let flat = Polytope::new(Matrix::from_fn(2, 5, |r, c| g2[(r, c)])).unwrap();
        // embed the plane as x + y + z = 0 in R^3
        let e = Matrix::from_rows(&[
            vec![1.0 / 2f64.sqrt(), 1.0 / 6f64.sqrt()],
            vec![-1.0 / 2f64.sqrt(), 1.0 / 6f64.sqrt()],
            vec![0.0, -2.0 / 6f64.sqrt()],
        ])
        .unwrap();
        let lifted = Polytope::new(e.matmul(&g2).unwrap()).unwrap();
        assert!(!lifted.spans_ambient().unwrap());
        let a = inradius(&flat).unwrap();
        let b = inradius(&lifted).unwrap();
        assert_eq!(b.span_dim, 2);
        assert!((a.lower - b.lower).abs() < 1e-10);
        let zero = Polytope::new(Matrix::<f64>::zeros(3, 2)).unwrap();
        assert_eq!(inradius(&zero).unwrap(), RadiusEstimate::exact(0.0, 0));
    }

    /// Two subspaces of R^6 on disjoint coordinate pairs.
    fn orthogonal_model(per: usize, seed: u64) -> UosModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bases = Vec::new();
        let mut coeffs = Vec::new();
        let mut cols = Vec::new();
        let mut labels = Vec::new();
        for ell in 0..2 {
            let u = Matrix::from_fn(6, 2, |r, c| if r == 2 * ell + c { 1.0 } else { 0.0 });
            let a = Matrix::from_fn(2, per, |_, _| rng.random_range(-1.0..1.0));
            let x = u.matmul(&a).unwrap();
            cols.extend(x.columns());
            labels.extend(std::iter::repeat_n(ell, per));
            bases.push(u);
            coeffs.push(a);
        }
        UosModel {
            n: 6,
            dims: vec![2, 2],
            bases,
            coeffs,
            labels,
            data: Matrix::from_cols(&cols).unwrap(),
            mode: GenerationMode::Sphere,
        }
    }

    #[test]
    fn orthogonal_subspaces_have_zero_lhs() {
        let model = orthogonal_model(6, 1);
        let x = ObservedMatrix::fully_observed(&model.data);
        for check in [check_thm_oo::<f64>, check_thm_ewzf::<f64>, check_thm_same_location::<f64>] {
            let rep = check(&model, &x, 0, 2).unwrap();
            assert_eq!(rep.entries.len(), 6);
            assert!(rep.entries.iter().all(|e| e.lhs.abs() < 1e-12));
            assert!(rep.holds && rep.margin > 0.0);
        }
        let c2 = expected_coherence(&model, &(0..6).collect::<Vec<_>>(), 0, 1).unwrap();
        assert!(c2.abs() < 1e-12);
    }

    #[test]
    fn subject_rotates_to_sigma_r_a() {
        let model = generate_model::<f64>(8, &[2, 2], &[6, 6], GenerationMode::Sphere, 4).unwrap();
        let spec = SamplingSpec {
            pattern: SamplingPattern::PerColumnRandom,
            p: 0.75,
            seed: 9,
        };
        let x = sample(&model, &spec).unwrap();
        let (subject, _, _) = rotated_problem(&model, &x, 1, 3, true).unwrap();
        let col = model.members(1)[3];
        let tb = truncated_basis_svd(&model, x.omega(col), 1).unwrap();
        let expect = tb
            .sigma_matrix()
            .matmul(&tb.r.transpose())
            .unwrap()
            .matvec(&model.coeff(1, 3));
        for (a, b) in subject.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn full_observation_variants_agree() {
        let model = generate_model::<f64>(8, &[2, 2, 2], &[5, 5, 5], GenerationMode::Sphere, 7).unwrap();
        let x = ObservedMatrix::fully_observed(&model.data);
        for i in 0..5 {
            let oo = check_thm_oo(&model, &x, 1, i).unwrap();
            let ew = check_thm_ewzf(&model, &x, 1, i).unwrap();
            assert_eq!(oo.entries.len(), 10);
            for (a, b) in oo.entries.iter().zip(&ew.entries) {
                assert!((a.lhs - b.lhs).abs() < 1e-10);
            }
            let sl = check_thm_same_location(&model, &x, 1, i).unwrap();
            let co = corollary1(&model, 1, i).unwrap();
            for (a, b) in sl.entries.iter().zip(&co.entries) {
                assert!((a.lhs - b.lhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn same_location_rejects_random_masks() {
        let model = generate_model::<f64>(8, &[2, 2], &[5, 5], GenerationMode::Sphere, 1).unwrap();
        let spec = SamplingSpec {
            pattern: SamplingPattern::PerColumnRandom,
            p: 0.5,
            seed: 2,
        };
        let x = sample(&model, &spec).unwrap();
        assert!(check_thm_same_location(&model, &x, 0, 0).is_err());
    }

    fn spectral_oracle(m: &Matrix<f64>) -> f64 {
        let g = m.tr_matmul(m).unwrap();
        sym_eig(&g).unwrap().values.iter().fold(0.0f64, |a, &v| a.max(v)).sqrt()
    }

    #[test]
    fn case2_bound_is_a_spectral_norm() {
        let model = generate_model::<f64>(6, &[2, 2], &[7, 7], GenerationMode::Sphere, 3).unwrap();
        let mut mask = vec![true; 6 * 14];
        // point 0 of subspace 0 observed on rows 1 and 4 only
        for r in [0, 2, 3, 5] {
            mask[r * 14] = false;
        }
        let x = ObservedMatrix::new(&model.data, mask).unwrap();
        let wc = check_case2_worst(&model, &x, 0, 0).unwrap();
        let q = thin_svd(&model.bases[0].select_rows(&[1, 4])).unwrap().u;
        let mut expect = 0.0f64;
        for j in 0..7 {
            let v = model.bases[1].select_rows(&[1, 4]);
            let na = norm2(&model.coeff(1, j));
            expect = expect.max(spectral_oracle(&q.tr_matmul(&v).unwrap()) * na);
        }
        assert!((wc.bound_lhs - expect).abs() < 1e-10);
        assert_eq!(wc.holds, wc.bound_lhs < wc.inradius.lower);
        assert!(matches!(
            check_case2_worst(&model, &x, 0, 1),
            Err(Error::AssumptionViolated(_))
        ));
    }

    #[test]
    fn case2_orthogonal_holds() {
        let model = orthogonal_model(6, 4);
        let mut mask = vec![true; 6 * 12];
        for r in 2..6 {
            mask[r * 12] = false;
        }
        let x = ObservedMatrix::new(&model.data, mask).unwrap();
        let wc = check_case2_worst(&model, &x, 0, 0).unwrap();
        assert_eq!(wc.bound_lhs, 0.0);
        assert!(wc.holds);
    }

    #[test]
    fn case3_full_observation_has_no_residual() {
        let model = generate_model::<f64>(8, &[2, 2], &[6, 6], GenerationMode::Sphere, 5).unwrap();
        let x = ObservedMatrix::fully_observed(&model.data);
        let sc = check_case3_worst(&model, &x, 0, 1, 0.5).unwrap();
        assert!(sc.residual < 1e-10);
        let expect_best = if sc.coherence < sc.inradius.lower { sc.holds_at_best } else { false };
        assert_eq!(sc.holds_at_best, expect_best);
        assert!(check_case3_worst(&model, &x, 0, 1, 1.5).is_err());
    }

    /// Three 2-D subspaces of R^12 on their own blocks of four coordinates.
    /// Subspace 0 lives exactly on its block; the others leak slightly
    /// into it.
    fn blocked_model(seed: u64) -> UosModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut bases, mut coeffs, mut cols, mut labels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for ell in 0..3 {
            let raw = Matrix::from_fn(12, 2, |r, _| {
                if r / 4 == ell {
                    rng.random_range(-1.0..1.0)
                } else if r / 4 == 0 {
                    0.05 * rng.random_range(-1.0..1.0)
                } else {
                    0.0
                }
            });
            let u = crate::numkit::qr(&raw).unwrap().q;
            let a = Matrix::from_fn(2, 8, |_, _| rng.random_range(-1.0..1.0));
            let a = Matrix::from_cols(
                &a.columns()
                    .iter()
                    .map(|c| c.iter().map(|v| v / norm2(c)).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            cols.extend(u.matmul(&a).unwrap().columns());
            labels.extend(std::iter::repeat_n(ell, 8));
            bases.push(u);
            coeffs.push(a);
        }
        UosModel {
            n: 12,
            dims: vec![2; 3],
            bases,
            coeffs,
            labels,
            data: Matrix::from_cols(&cols).unwrap(),
            mode: GenerationMode::Sphere,
        }
    }

    #[test]
    fn case3_implies_dual_feasibility() {
        let mut found = 0;
        for seed in 0..30 {
            let model = blocked_model(seed);
            let spec = SamplingSpec {
                pattern: SamplingPattern::PerColumnRandom,
                p: 0.9,
                seed: seed + 100,
            };
            let x = sample(&model, &spec).unwrap();
            for i in 0..8 {
                let Ok(sc) = check_case3_worst(&model, &x, 0, i, 0.5) else {
                    continue;
                };
                if !sc.holds_at_best {
                    continue;
                }
                found += 1;
                let prob = restricted_problem(&model, &x, 0, i).unwrap();
                let col = model.members(0)[i];
                let omega = x.omega(col);
                let subject: Vec<f64> = omega.iter().map(|&r| x.values()[(r, col)]).collect();
                let nu = dual_direction(&subject, &prob.dict).unwrap().lambda;
                for c in model.members(1).into_iter().chain(model.members(2)) {
                    let y: Vec<f64> = omega.iter().map(|&r| x.values()[(r, c)]).collect();
                    assert!(dot3(&nu, &y).abs() < 1.0);
                }
            }
        }
        assert!(found > 10, "only {found} points satisfied the split condition");
    }

    #[test]
    fn coherence_of_a_subspace_with_itself() {
        let model = generate_model::<f64>(9, &[3, 3], &[4, 4], GenerationMode::Sphere, 6).unwrap();
        let all: Vec<usize> = (0..9).collect();
        let c = expected_coherence(&model, &all, 1, 1).unwrap();
        assert!((c - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        // M = I: the mean is exactly E|u_1| = 1/2, at the top of the range
        let pred = coherence_prediction(&model, &all, 1, 1).unwrap();
        let r = 0.5 * 3f64.sqrt();
        assert!(((0.5 - pred) / pred - (1.0 - r) / (1.0 + r)).abs() < 1e-12);
    }

    #[test]
    fn sphere_means() {
        assert_eq!(sphere_abs_mean(1), 1.0);
        assert!((sphere_abs_mean(2) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!((sphere_abs_mean(3) - 0.5).abs() < 1e-15);
        assert!((sphere_abs_mean(5) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn beta_ratio_runs_on_small_instance() {
        let model = generate_model::<f64>(6, &[2, 2], &[6, 6], GenerationMode::Sphere, 2).unwrap();
        let x = ObservedMatrix::fully_observed(&model.data);
        let b = beta_ratio(&model, &x, 0, 0).unwrap();
        assert!(b.exact);
        assert!(b.beta1 > 0.0 && b.beta1 <= 1.0 + 1e-9);
        assert!(b.beta2 > 0.0 && b.beta2 <= 1.0 + 1e-9);
        // an orthonormal basis preserves both polytopes
        assert!((b.ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn csv_rows() {
        let model = orthogonal_model(3, 2);
        let x = ObservedMatrix::fully_observed(&model.data);
        let rep = check_thm_oo(&model, &x, 1, 0).unwrap();
        let csv = certificate_csv(&[rep]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "ell,i,k,j,lhs,inradius_lower,inradius_upper,exact,holds,margin");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,0,0,0,0,"));
        assert!(lines[1].ends_with(",true,true,") || lines[1].contains(",true,true,"));
    }
}
