//! Union-of-subspaces data generation and observation masks.
//!
//! Two generative recipes are supported. In [`GenerationMode::Sphere`] every
//! subspace gets an orthonormal basis from the QR factor of a Gaussian matrix
//! and coefficient columns drawn uniformly on the unit sphere. In
//! [`GenerationMode::Gaussian`] each cluster is the product of two Gaussian
//! matrices; the stored basis and coefficients are recovered from its SVD so
//! that bases are always orthonormal, while the raw product is kept as data.
//!
//! Columns are laid out cluster by cluster, so `labels` is nondecreasing.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numkit::{qr, svd, thin_svd, Matrix, SvdResult};
use crate::scalar::{round_half_away, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationMode {
    Sphere,
    Gaussian,
}

/// Ground-truth union-of-subspaces sample.
#[derive(Debug, Clone)]
pub struct UosModel<T> {
    pub n: usize,
    pub dims: Vec<usize>,
    /// Orthonormal bases, one n x d_l matrix per subspace.
    pub bases: Vec<Matrix<T>>,
    /// Coefficients, one d_l x N_l matrix per subspace.
    pub coeffs: Vec<Matrix<T>>,
    /// True label of every column.
    pub labels: Vec<usize>,
    /// Full data matrix, n x N.
    pub data: Matrix<T>,
    pub mode: GenerationMode,
}

impl<T: Real> UosModel<T> {
    pub fn num_subspaces(&self) -> usize {
        self.bases.len()
    }

    pub fn num_points(&self) -> usize {
        self.labels.len()
    }

    /// Global column indices belonging to subspace `ell`.
    pub fn members(&self, ell: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == ell)
            .map(|(i, _)| i)
            .collect()
    }

    /// `(subspace, position within subspace)` of a global column.
    pub fn locate(&self, col: usize) -> (usize, usize) {
        let ell = self.labels[col];
        let pos = self.labels[..col].iter().filter(|&&l| l == ell).count();
        (ell, pos)
    }

    /// Coefficient vector of the `j`-th point of subspace `ell`.
    pub fn coeff(&self, ell: usize, j: usize) -> Vec<T> {
        self.coeffs[ell].col(j)
    }

    /// Rescales every data column to unit norm, adjusting coefficients so
    /// that `data = U A` still holds.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        let mut pos = vec![0usize; self.bases.len()];
        for c in 0..self.num_points() {
            let col = self.data.col(c);
            let nrm = crate::numkit::norm2(&col);
            let ell = self.labels[c];
            let j = pos[ell];
            pos[ell] += 1;
            if nrm > T::zero() {
                let scaled: Vec<T> = col.iter().map(|&v| v / nrm).collect();
                out.data.set_col(c, &scaled);
                let a: Vec<T> = self.coeffs[ell].col(j).iter().map(|&v| v / nrm).collect();
                out.coeffs[ell].set_col(j, &a);
            }
        }
        out
    }
}

fn gaussian_matrix<T: Real>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        T::lit(v)
    })
}

/// Draws a union-of-subspaces sample.
pub fn generate_model<T: Real>(
    n: usize,
    dims: &[usize],
    n_per: &[usize],
    mode: GenerationMode,
    seed: u64,
) -> Result<UosModel<T>> {
    if dims.is_empty() || dims.len() != n_per.len() {
        return Err(Error::InvalidArgument(format!(
            "need one point count per subspace ({} dims, {} counts)",
            dims.len(),
            n_per.len()
        )));
    }
    if let Some(&d) = dims.iter().find(|&&d| d == 0 || d > n) {
        return Err(Error::InvalidArgument(format!(
            "subspace dimension {d} not in 1..={n}"
        )));
    }
    if n_per.contains(&0) {
        return Err(Error::InvalidArgument(
            "every subspace needs at least one point".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = n_per.iter().sum();
    let mut bases = Vec::with_capacity(dims.len());
    let mut coeffs = Vec::with_capacity(dims.len());
    let mut labels = Vec::with_capacity(total);
    let mut data = Matrix::zeros(n, total);
    let mut offset = 0;
    for (ell, (&d, &count)) in dims.iter().zip(n_per).enumerate() {
        let (basis, a, block) = match mode {
            GenerationMode::Sphere => {
                let basis = qr(&gaussian_matrix::<T>(n, d, &mut rng))?.q;
                let mut a = gaussian_matrix::<T>(d, count, &mut rng);
                for j in 0..count {
                    let col = a.col(j);
                    let nrm = crate::numkit::norm2(&col);
                    let unit: Vec<T> = col.iter().map(|&v| v / nrm).collect();
                    a.set_col(j, &unit);
                }
                let block = basis.matmul(&a)?;
                (basis, a, block)
            }
            GenerationMode::Gaussian => {
                let left = gaussian_matrix::<T>(n, d, &mut rng);
                let right = gaussian_matrix::<T>(d, count, &mut rng);
                let block = left.matmul(&right)?;
                let f = thin_svd(&block)?;
                let keep: Vec<usize> = (0..d).collect();
                let basis = f.u.select_cols(&keep);
                let a = Matrix::from_fn(d, count, |r, c| f.s[r] * f.vt[(r, c)]);
                (basis, a, block)
            }
        };
        for j in 0..count {
            data.set_col(offset + j, &block.col(j));
            labels.push(ell);
        }
        offset += count;
        bases.push(basis);
        coeffs.push(a);
    }
    Ok(UosModel {
        n,
        dims: dims.to_vec(),
        bases,
        coeffs,
        labels,
        data,
        mode,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingPattern {
    /// Every column observed on the first `round(p n)` coordinates.
    SameLocation,
    /// Every column observed on one common random subset of size `round(p n)`.
    SameLocationRandom,
    /// Each column observed on its own uniform random subset of size `round(p n)`.
    PerColumnRandom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSpec {
    pub pattern: SamplingPattern,
    pub p: f64,
    pub seed: u64,
}

impl SamplingSpec {
    /// Observed coordinates per column for ambient dimension `n`.
    pub fn observed_count(&self, n: usize) -> usize {
        round_half_away(self.p * n as f64).min(n)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sampling ratio {} not in (0, 1]",
                self.p
            )));
        }
        if self.observed_count(n) == 0 {
            return Err(Error::InvalidArgument(format!(
                "sampling ratio {} observes no coordinate of {n}",
                self.p
            )));
        }
        Ok(())
    }
}

/// Zero-filled data with its observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix<T> {
    values: Matrix<T>,
    mask: Vec<bool>,
    omegas: Vec<Vec<usize>>,
}

impl<T: Real> ObservedMatrix<T> {
    /// Applies `mask` (row-major, true = observed) to `data`, zeroing the
    /// unobserved entries.
    pub fn new(data: &Matrix<T>, mask: Vec<bool>) -> Result<Self> {
        let (rows, cols) = data.shape();
        if mask.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "mask has {} entries for a {rows}x{cols} matrix",
                mask.len()
            )));
        }
        let mut values = data.clone();
        let mut omegas = vec![Vec::new(); cols];
        for r in 0..rows {
            for c in 0..cols {
                if mask[r * cols + c] {
                    omegas[c].push(r);
                } else {
                    values[(r, c)] = T::zero();
                }
            }
        }
        if let Some(c) = omegas.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!(
                "column {c} has no observed entry"
            )));
        }
        Ok(Self {
            values,
            mask,
            omegas,
        })
    }

    pub fn fully_observed(data: &Matrix<T>) -> Self {
        Self::new(data, vec![true; data.rows() * data.cols()]).expect("full mask")
    }

    /// Zero-filled values.
    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    /// Row-major observation mask.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_observed(&self, r: usize, c: usize) -> bool {
        self.mask[r * self.cols() + c]
    }

    /// Observed row indices of column `c`, ascending.
    pub fn omega(&self, c: usize) -> &[usize] {
        &self.omegas[c]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        self.values.col(c)
    }

    /// True when every column is observed on the same coordinates.
    pub fn is_same_location(&self) -> bool {
        self.omegas.windows(2).all(|w| w[0] == w[1])
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Fraction of observed entries.
    pub fn observed_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len().max(1) as f64
    }

    /// Restriction to the given columns, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Self {
        let values = self.values.select_cols(idx);
        let cols = self.cols();
        let mut mask = Vec::with_capacity(self.rows() * idx.len());
        for r in 0..self.rows() {
            for &c in idx {
                mask.push(self.mask[r * cols + c]);
            }
        }
        let omegas = idx.iter().map(|&c| self.omegas[c].clone()).collect();
        Self {
            values,
            mask,
            omegas,
        }
    }
}

/// Samples the model's data according to `spec`.
pub fn sample<T: Real>(model: &UosModel<T>, spec: &SamplingSpec) -> Result<ObservedMatrix<T>> {
    sample_matrix(&model.data, spec)
}

/// Samples an arbitrary data matrix according to `spec`.
pub fn sample_matrix<T: Real>(data: &Matrix<T>, spec: &SamplingSpec) -> Result<ObservedMatrix<T>> {
    let (n, cols) = data.shape();
    spec.validate(n)?;
    let m = spec.observed_count(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let mut mask = vec![false; n * cols];
    let mut mark = |rows: &[usize], c: usize| {
        for &r in rows {
            mask[r * cols + c] = true;
        }
    };
    match spec.pattern {
        SamplingPattern::SameLocation => {
            let rows: Vec<usize> = (0..m).collect();
            (0..cols).for_each(|c| mark(&rows, c));
        }
        SamplingPattern::SameLocationRandom => {
            let mut rows = index::sample(&mut rng, n, m).into_vec();
            rows.sort_unstable();
            (0..cols).for_each(|c| mark(&rows, c));
        }
        SamplingPattern::PerColumnRandom => {
            for c in 0..cols {
                let rows = index::sample(&mut rng, n, m).into_vec();
                mark(&rows, c);
            }
        }
    }
    ObservedMatrix::new(data, mask)
}

/// SVD factors of the truncated basis `I_omega U_ell`.
#[derive(Debug, Clone)]
pub struct TruncatedBasis<T> {
    /// n x n orthogonal.
    pub q: Matrix<T>,
    /// The d singular values (the diagonal of the n x d factor).
    pub sigma: Vec<T>,
    /// d x d orthogonal.
    pub r: Matrix<T>,
}

impl<T: Real> TruncatedBasis<T> {
    /// The n x d diagonal factor.
    pub fn sigma_matrix(&self) -> Matrix<T> {
        let n = self.q.rows();
        Matrix::from_fn(n, self.sigma.len(), |r, c| {
            if r == c {
                self.sigma[r]
            } else {
                T::zero()
            }
        })
    }

    /// `q * sigma * r^T`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let sr = self
            .sigma_matrix()
            .matmul(&self.r.transpose())
            .expect("shapes");
        self.q.matmul(&sr).expect("shapes")
    }
}

/// Rows of `basis` outside `omega` zeroed.
pub fn restrict_rows<T: Real>(basis: &Matrix<T>, omega: &[usize]) -> Matrix<T> {
    let mut keep = vec![false; basis.rows()];
    omega.iter().for_each(|&r| keep[r] = true);
    Matrix::from_fn(basis.rows(), basis.cols(), |r, c| {
        if keep[r] {
            basis[(r, c)]
        } else {
            T::zero()
        }
    })
}

pub fn truncated_basis_svd<T: Real>(
    model: &UosModel<T>,
    omega: &[usize],
    ell: usize,
) -> Result<TruncatedBasis<T>> {
    if omega.is_empty() {
        return Err(Error::InvalidArgument("empty observation set".into()));
    }
    let v = restrict_rows(&model.bases[ell], omega);
    let SvdResult { u, s, vt } = svd(&v)?;
    Ok(TruncatedBasis {
        q: u,
        sigma: s,
        r: vt.transpose(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_shapes() {
        let m = generate_model::<f64>(
            50,
            &[3, 3, 3],
            &[150, 150, 150],
            GenerationMode::Gaussian,
            1,
        )
        .unwrap();
        assert_eq!(m.data.shape(), (50, 450));
        assert_eq!(m.labels.len(), 450);
        for ell in 0..3 {
            let block = m.data.select_cols(&m.members(ell));
            assert_eq!(svd(&block).unwrap().rank(1e-8), 3);
            let recon = m.bases[ell].matmul(&m.coeffs[ell]).unwrap();
            assert!(recon.sub(&block).unwrap().max_abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_mode_invariants() {
        let m = generate_model::<f64>(10, &[2, 3], &[5, 7], GenerationMode::Sphere, 4).unwrap();
        for (ell, u) in m.bases.iter().enumerate() {
            let g = u.tr_matmul(u).unwrap();
            assert!(g.sub(&Matrix::identity(m.dims[ell])).unwrap().max_abs() < 1e-10);
            for j in 0..m.coeffs[ell].cols() {
                let nrm = crate::numkit::norm2(&m.coeffs[ell].col(j));
                assert!((nrm - 1.0).abs() < 1e-12);
            }
        }
        let mut sorted = m.labels.clone();
        sorted.dedup();
        assert_eq!(sorted, vec![0, 1]);
    }

    #[test]
    fn rank_one_columns_are_parallel() {
        let m = generate_model::<f64>(4, &[1], &[5], GenerationMode::Sphere, 2).unwrap();
        let c0 = m.data.col(0);
        for j in 1..5 {
            let cj = m.data.col(j);
            let cos = crate::numkit::dot(&c0, &cj)
                / (crate::numkit::norm2(&c0) * crate::numkit::norm2(&cj));
            assert!((cos.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_oversized_dims() {
        assert!(generate_model::<f64>(3, &[4], &[2], GenerationMode::Sphere, 0).is_err());
    }

    #[test]
    fn mask_cardinalities() {
        let m = generate_model::<f64>(50, &[3, 3], &[20, 20], GenerationMode::Gaussian, 3).unwrap();
        let same = sample(
            &m,
            &SamplingSpec {
                pattern: SamplingPattern::SameLocation,
                p: 0.12,
                seed: 1,
            },
        )
        .unwrap();
        assert!(same.is_same_location());
        assert_eq!(same.omega(0), &[0, 1, 2, 3, 4, 5]);
        let rnd = sample(
            &m,
            &SamplingSpec {
                pattern: SamplingPattern::PerColumnRandom,
                p: 0.36,
                seed: 1,
            },
        )
        .unwrap();
        assert!((0..rnd.cols()).all(|c| rnd.omega(c).len() == 18));
        assert!(!rnd.is_same_location());
        let full = sample(
            &m,
            &SamplingSpec {
                pattern: SamplingPattern::PerColumnRandom,
                p: 1.0,
                seed: 1,
            },
        )
        .unwrap();
        assert!(full.is_fully_observed());
        assert_eq!(full.values(), &m.data);
        let common = sample(
            &m,
            &SamplingSpec {
                pattern: SamplingPattern::SameLocationRandom,
                p: 0.2,
                seed: 9,
            },
        )
        .unwrap();
        assert!(common.is_same_location());
    }

    #[test]
    fn zero_fill_is_idempotent() {
        let m = generate_model::<f64>(8, &[2], &[6], GenerationMode::Sphere, 5).unwrap();
        let obs = sample(
            &m,
            &SamplingSpec {
                pattern: SamplingPattern::PerColumnRandom,
                p: 0.5,
                seed: 2,
            },
        )
        .unwrap();
        let again = ObservedMatrix::new(obs.values(), obs.mask().to_vec()).unwrap();
        assert_eq!(again, obs);
    }

    #[test]
    fn truncated_basis_factors() {
        let m = generate_model::<f64>(6, &[2], &[4], GenerationMode::Sphere, 7).unwrap();
        let full: Vec<usize> = (0..6).collect();
        let tb = truncated_basis_svd(&m, &full, 0).unwrap();
        assert!(tb.sigma.iter().all(|s| (s - 1.0).abs() < 1e-12));
        let part = truncated_basis_svd(&m, &[1, 4], 0).unwrap();
        let v = restrict_rows(&m.bases[0], &[1, 4]);
        assert!(part.reconstruct().sub(&v).unwrap().max_abs() < 1e-10);
        assert_eq!(part.sigma.iter().filter(|&&s| s > 1e-10).count(), 2);
        assert!(part.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(part.q.shape(), (6, 6));
    }
}
