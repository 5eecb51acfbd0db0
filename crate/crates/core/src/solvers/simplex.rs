//! Revised primal simplex specialised to `min 1'(c+ + c-)` subject to
//! `A (c+ - c-) = b`, `c+, c- >= 0`.
//!
//! Phase 1 starts from an artificial basis (rows flipped so that `b >= 0`).
//! Artificials left in the basis at level zero are pivoted out, or their row
//! is dropped when it is a linear combination of the other rows; this handles
//! rank-deficient dictionaries. The basis inverse is kept explicitly and
//! refreshed from an LU factorisation every few pivots and before the final
//! duals are read off.

use crate::error::{Error, Result};
use crate::numkit::{dot, inverse, norm2, Matrix};
use crate::scalar::Real;

const REFACTOR_EVERY: usize = 64;

/// Partial pricing: columns are scanned in this many rotating segments.
const PRICING_SEGMENTS: usize = 8;

/// Raw output of the l1 simplex.
#[derive(Debug, Clone)]
pub(crate) struct L1Lp<T> {
    pub c: Vec<T>,
    pub nu: Vec<T>,
    pub iterations: usize,
}

struct State<T> {
    /// Active-row entries of every dictionary column (k x m_active).
    cols: Vec<Vec<T>>,
    b: Vec<T>,
    /// Original row index of every active row.
    rows: Vec<usize>,
    /// Row sign flips (true = row multiplied by -1).
    flipped: Vec<bool>,
    /// Basic variable of every position. `v < k` is `c+_v`, `k <= v < 2k`
    /// is `c-_{v-k}`, `v >= 2k` is the artificial of active row `v - 2k`.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Matrix<T>,
    xb: Vec<T>,
    k: usize,
    pivots_since_refactor: usize,
    iterations: usize,
    /// Right-hand side before bound shifting, when shifted.
    unshifted: Option<Vec<T>>,
}

fn opt_tol<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(100.0))
}

fn piv_tol<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1000.0))
}

/// Basic values at or below this are degenerate. Rounding noise must not
/// break ratio-test ties or Bland's rule can cycle.
fn zero_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(100.0))
}

fn level<T: Real>(x: T) -> T {
    if x <= zero_tol::<T>() {
        T::zero()
    } else {
        x
    }
}

impl<T: Real> State<T> {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn column(&self, v: usize) -> Vec<T> {
        let k = self.k;
        if v < k {
            self.cols[v].clone()
        } else if v < 2 * k {
            self.cols[v - k].iter().map(|&x| -x).collect()
        } else {
            let mut e = vec![T::zero(); self.m()];
            e[v - 2 * k] = T::one();
            e
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        let mut bmat = Matrix::zeros(m, m);
        for (p, &v) in self.basis.iter().enumerate() {
            bmat.set_col(p, &self.column(v));
        }
        self.binv = inverse(&bmat)
            .ok_or_else(|| Error::Degenerate("simplex basis became singular".into()))?;
        self.xb = self.binv.matvec(&self.b);
        self.pivots_since_refactor = 0;
        Ok(())
    }

    /// Simplex multipliers for the given basic costs.
    fn duals(&self, cb: &[T]) -> Vec<T> {
        self.binv.tr_matvec(cb)
    }

    fn pivot(&mut self, p: usize, q: usize, w: &[T]) -> Result<()> {
        let theta = level(self.xb[p]) / w[p];
        self.pivot_by(p, q, w, theta)
    }

    fn pivot_by(&mut self, p: usize, q: usize, w: &[T], theta: T) -> Result<()> {
        let m = self.m();
        let wp = w[p];
        for i in 0..m {
            if i == p {
                self.xb[i] = theta;
            } else {
                self.xb[i] -= theta * w[i];
                if self.xb[i] < T::zero() && self.xb[i] > -piv_tol::<T>() {
                    self.xb[i] = T::zero();
                }
            }
        }
        let prow: Vec<T> = self.binv.row(p).iter().map(|&x| x / wp).collect();
        for i in 0..m {
            if i == p || w[i] == T::zero() {
                continue;
            }
            let f = w[i];
            for (dst, &src) in self.binv.row_mut(i).iter_mut().zip(&prow) {
                *dst -= f * src;
            }
        }
        self.binv.row_mut(p).copy_from_slice(&prow);
        let old = self.basis[p];
        if old < 2 * self.k {
            self.is_basic[old] = false;
        }
        self.basis[p] = q;
        self.is_basic[q] = true;
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Runs simplex iterations for the phase whose basic costs are given by
    /// `cost`. Returns once no improving structural column remains.
    fn optimize(
        &mut self,
        cost: impl Fn(usize) -> T,
        structural_cost: T,
        max_iter: usize,
        shift: bool,
    ) -> Result<()> {
        let k = self.k;
        let tol = opt_tol::<T>();
        let mut degenerate_run = 0usize;
        let mut refreshed = false;
        let mut start = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(Error::NotConverged {
                    what: "basis pursuit simplex",
                    iterations: self.iterations,
                    residual: f64::NAN,
                });
            }
            let cb: Vec<T> = self.basis.iter().map(|&v| cost(v)).collect();
            let y = self.duals(&cb);
            let bland = degenerate_run > 2 * self.m() + 10;
            let mut entering: Option<(usize, T)> = None;
            let seg = if bland {
                k
            } else {
                k.div_ceil(PRICING_SEGMENTS)
            };
            let mut scanned = 0;
            while scanned < k && (entering.is_none() || bland) {
                for jj in scanned..(scanned + seg).min(k) {
                    let j = (jj + start) % k;
                    let g = dot(&self.cols[j], &y);
                    for (v, rc) in [(j, structural_cost - g), (j + k, structural_cost + g)] {
                        if self.is_basic[v] || rc >= -tol {
                            continue;
                        }
                        if bland {
                            if entering.is_none_or(|(e, _)| v < e) {
                                entering = Some((v, rc));
                            }
                        } else if entering.is_none_or(|(_, best)| rc < best) {
                            entering = Some((v, rc));
                        }
                    }
                }
                scanned += seg;
            }
            start = (start + scanned) % k.max(1);
            let Some((q, _)) = entering else {
                if refreshed || self.pivots_since_refactor == 0 {
                    return Ok(());
                }
                // confirm optimality on a fresh factorisation
                self.refactor()?;
                refreshed = true;
                continue;
            };
            refreshed = false;
            let w = self.binv.matvec(&self.column(q));
            let wmax = w.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
            let ptol = piv_tol::<T>() * T::one().max(wmax);
            let mut leave: Option<(usize, T)> = None;
            for (i, &wi) in w.iter().enumerate() {
                if wi <= ptol {
                    continue;
                }
                let t = level(self.xb[i]) / wi;
                match leave {
                    None => leave = Some((i, t)),
                    Some((l, tl)) => {
                        let tie = (t - tl).abs() <= T::epsilon() * T::lit(16.0) * T::one().max(tl);
                        let better = if tie {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                wi > w[l]
                            }
                        } else {
                            t < tl
                        };
                        if better {
                            leave = Some((i, t));
                        }
                    }
                }
            }
            let Some((p, t)) = leave else {
                if self.pivots_since_refactor > 0 {
                    self.refactor()?;
                    continue;
                }
                return Err(Error::Unbounded);
            };
            if t <= tol {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            if shift && degenerate_run > self.m() + 10 && self.unshifted.is_none() {
                self.shift_bounds();
                degenerate_run = 0;
                continue;
            }
            self.pivot(p, q, &w)?;
            self.iterations += 1;
        }
    }

    /// Lifts every basic value by a small distinct amount, moving `b` with
    /// it, so that a degenerate vertex splits into nearby simple ones.
    fn shift_bounds(&mut self) {
        let bmax = self.b.iter().fold(T::one(), |a, &x| a.max(x.abs()));
        self.unshifted = Some(self.b.clone());
        for p in 0..self.m() {
            let u = ((p as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64 / (1u64 << 53) as f64;
            let e = T::lit(1e-7 * (1.0 + u)) * bmax;
            self.xb[p] += e;
            let col = self.column(self.basis[p]);
            for (bi, &ci) in self.b.iter_mut().zip(&col) {
                *bi += e * ci;
            }
        }
    }

    /// Restores the original right-hand side after bound shifting and
    /// repairs the small primal infeasibility this leaves with dual simplex
    /// pivots. Reduced costs stay nonnegative throughout.
    fn unshift(&mut self, max_iter: usize) -> Result<()> {
        let Some(b) = self.unshifted.take() else {
            return Ok(());
        };
        self.b = b;
        self.refactor()?;
        let k = self.k;
        let ftol = zero_tol::<T>();
        loop {
            let Some((r, _)) = self
                .xb
                .iter()
                .enumerate()
                .filter(|(_, &x)| x < -ftol)
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            else {
                for x in self.xb.iter_mut() {
                    *x = x.max(T::zero());
                }
                return Ok(());
            };
            if self.iterations >= max_iter {
                return Err(Error::NotConverged {
                    what: "basis pursuit simplex",
                    iterations: self.iterations,
                    residual: self.xb[r].to_f64_lossy(),
                });
            }
            let rho = self.binv.row(r).to_vec();
            let y = self.duals(&vec![T::one(); self.m()]);
            let ptol = piv_tol::<T>();
            let mut entering: Option<(usize, T)> = None;
            for j in 0..k {
                let a = dot(&self.cols[j], &rho);
                let g = dot(&self.cols[j], &y);
                for (v, alpha, rc) in [(j, a, T::one() - g), (j + k, -a, T::one() + g)] {
                    if self.is_basic[v] || alpha >= -ptol {
                        continue;
                    }
                    let ratio = rc.max(T::zero()) / -alpha;
                    if entering.is_none_or(|(_, best)| ratio < best) {
                        entering = Some((v, ratio));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Err(Error::Degenerate(
                    "no dual simplex pivot repairs the shifted basis".into(),
                ));
            };
            let w = self.binv.matvec(&self.column(q));
            let theta = self.xb[r] / w[r];
            self.pivot_by(r, q, &w, theta)?;
            self.iterations += 1;
        }
    }

    /// Crash basis: columns in order of decreasing normalised correlation
    /// with `b`, kept when they add a new direction, completed with
    /// artificials. Signs of the structural variables are chosen so the
    /// start is primal feasible. Returns false when no usable start was
    /// found, leaving the all-artificial basis in place.
    fn crash(&mut self) -> Result<bool> {
        let (m, k) = (self.m(), self.k);
        let mut order: Vec<(usize, T)> = (0..k)
            .filter_map(|j| {
                let nrm = norm2(&self.cols[j]);
                (nrm > T::zero()).then(|| (j, dot(&self.cols[j], &self.b).abs() / nrm))
            })
            .collect();
        order.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        let mut q: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut chosen = Vec::with_capacity(m);
        let accept = |v: Vec<T>, q: &mut Vec<Vec<T>>| -> bool {
            let mut v = v;
            let n0 = norm2(&v);
            for _ in 0..2 {
                for u in q.iter() {
                    let p = dot(u, &v);
                    crate::numkit::axpy(-p, u, &mut v);
                }
            }
            let n1 = norm2(&v);
            if n1 > T::lit(1e-6) * n0 {
                v.iter_mut().for_each(|x| *x /= n1);
                q.push(v);
                true
            } else {
                false
            }
        };
        for &(j, _) in &order {
            if q.len() == m {
                break;
            }
            if accept(self.cols[j].clone(), &mut q) {
                chosen.push(j);
            }
        }
        for r in 0..m {
            if q.len() == m {
                break;
            }
            let mut e = vec![T::zero(); m];
            e[r] = T::one();
            if accept(e, &mut q) {
                chosen.push(2 * k + r);
            }
        }
        if q.len() < m {
            return Ok(false);
        }
        let saved = (self.basis.clone(), self.binv.clone(), self.xb.clone());
        self.basis = chosen;
        if self.refactor().is_err() {
            (self.basis, self.binv, self.xb) = saved;
            return Ok(false);
        }
        let tol = piv_tol::<T>();
        for p in 0..m {
            if self.xb[p] >= T::zero() {
                continue;
            }
            let v = self.basis[p];
            if v < k {
                self.basis[p] = v + k;
            } else if v < 2 * k {
                self.basis[p] = v - k;
            } else if self.xb[p] > -tol {
                self.xb[p] = T::zero();
                continue;
            } else {
                (self.basis, self.binv, self.xb) = saved;
                self.pivots_since_refactor = 0;
                return Ok(false);
            }
            self.xb[p] = -self.xb[p];
            self.binv.row_mut(p).iter_mut().for_each(|x| *x = -*x);
        }
        self.is_basic.iter_mut().for_each(|b| *b = false);
        for &v in &self.basis {
            if v < 2 * k {
                self.is_basic[v] = true;
            }
        }
        Ok(true)
    }

    /// Pivots zero-level artificials out of the basis; rows that cannot be
    /// cleared are linearly dependent and are removed.
    fn purge_artificials(&mut self) -> Result<()> {
        let k = self.k;
        let mut redundant = Vec::new();
        let mut p = 0;
        while p < self.m() {
            if self.basis[p] < 2 * k {
                p += 1;
                continue;
            }
            let rho = self.binv.row(p).to_vec();
            let mut best: Option<(usize, T)> = None;
            for j in 0..k {
                if self.is_basic[j] || self.is_basic[j + k] {
                    continue;
                }
                let v = dot(&self.cols[j], &rho).abs();
                if v > T::lit(1e-7) && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, _)) => {
                    let w = self.binv.matvec(&self.cols[j]);
                    self.pivot(p, j, &w)?;
                }
                None => redundant.push(p),
            }
            p += 1;
        }
        if redundant.is_empty() {
            return Ok(());
        }
        // Drop the rows carried by the stranded artificials.
        let drop_rows: Vec<usize> = redundant.iter().map(|&p| self.basis[p] - 2 * k).collect();
        let keep: Vec<usize> = (0..self.m()).filter(|r| !drop_rows.contains(r)).collect();
        self.cols = self
            .cols
            .iter()
            .map(|c| keep.iter().map(|&r| c[r]).collect())
            .collect();
        self.b = keep.iter().map(|&r| self.b[r]).collect();
        self.rows = keep.iter().map(|&r| self.rows[r]).collect();
        self.basis = self
            .basis
            .iter()
            .enumerate()
            .filter(|(p, _)| !redundant.contains(p))
            .map(|(_, &v)| v)
            .collect();
        self.refactor()
    }
}

/// Solves basis pursuit `min ||c||_1 s.t. a c = b`. `feas_tol` is relative
/// to `max(1, ||b||_inf)` after scaling the data to unit max entry.
pub(crate) fn l1_simplex<T: Real>(a: &Matrix<T>, b: &[T], feas_tol: T) -> Result<L1Lp<T>> {
    let (m, k) = a.shape();
    let scale = a.max_abs();
    if scale == T::zero() {
        if b.iter().all(|&v| v == T::zero()) {
            return Ok(L1Lp {
                c: vec![T::zero(); k],
                nu: vec![T::zero(); m],
                iterations: 0,
            });
        }
        return Err(Error::Infeasible(crate::numkit::norm2(b).to_f64_lossy()));
    }
    let inv = T::one() / scale;
    let flipped: Vec<bool> = b.iter().map(|&v| v < T::zero()).collect();
    let sgn = |r: usize| if flipped[r] { -inv } else { inv };
    let cols: Vec<Vec<T>> = (0..k)
        .map(|j| (0..m).map(|r| a[(r, j)] * sgn(r)).collect())
        .collect();
    let bs: Vec<T> = (0..m).map(|r| b[r] * sgn(r)).collect();
    let mut st = State {
        cols,
        b: bs.clone(),
        rows: (0..m).collect(),
        flipped: flipped.clone(),
        basis: (0..m).map(|r| 2 * k + r).collect(),
        is_basic: vec![false; 2 * k],
        binv: Matrix::identity(m),
        xb: bs.clone(),
        k,
        pivots_since_refactor: 0,
        iterations: 0,
        unshifted: None,
    };
    let max_iter = 50 * (m + 2 * k) + 1000;

    st.crash()?;
    // Phase 1: drive the artificials to zero.
    st.optimize(
        |v| if v >= 2 * k { T::one() } else { T::zero() },
        T::zero(),
        max_iter,
        false,
    )?;
    let infeas: T = st
        .basis
        .iter()
        .zip(&st.xb)
        .filter(|(&v, _)| v >= 2 * k)
        .map(|(_, &x)| x.abs())
        .sum();
    let bnorm = bs.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    if infeas > feas_tol * T::one().max(bnorm) * T::of(m.max(1)) {
        return Err(Error::Infeasible((infeas * scale).to_f64_lossy()));
    }
    st.purge_artificials()?;
    if st.basis.iter().any(|&v| v >= 2 * k) {
        return Err(Error::Degenerate(
            "artificial variable left in basis".into(),
        ));
    }

    // Phase 2: minimise the l1 norm.
    st.optimize(|_| T::one(), T::one(), max_iter, true)?;
    if st.unshifted.is_some() {
        st.unshift(max_iter)?;
        st.optimize(|_| T::one(), T::one(), max_iter, false)?;
    }
    st.refactor()?;
    let mut c = vec![T::zero(); k];
    for (&v, &x) in st.basis.iter().zip(&st.xb) {
        let x = x.max(T::zero());
        if v < k {
            c[v] += x;
        } else {
            c[v - k] -= x;
        }
    }
    // degenerate basic variables carry roundoff only
    let cmax = c.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let floor = cmax * T::epsilon() * T::lit(1e3);
    c.iter_mut()
        .filter(|v| v.abs() <= floor)
        .for_each(|v| *v = T::zero());
    let y = st.duals(&vec![T::one(); st.m()]);
    let mut nu = vec![T::zero(); m];
    for (pos, &r) in st.rows.iter().enumerate() {
        nu[r] = if st.flipped[r] { -y[pos] } else { y[pos] } * inv;
    }
    Ok(L1Lp {
        c,
        nu,
        iterations: st.iterations,
    })
}
