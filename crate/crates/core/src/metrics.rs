//! Clustering, completion and subspace error measures.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numkit::{thin_svd, Matrix};
use crate::scalar::Real;

/// Label indices `0..k` in order of first appearance of the distinct values.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// potentials form). Returns `assign[row] = col`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    // p[col] = row matched to col, 1-based with 0 as the virtual row
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// Fraction of points mislabelled under the best bijection between
/// predicted and true label sets. Label sets of different sizes are padded
/// with empty labels.
pub fn clustering_error(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predicted labels for {} points",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let (p, np) = compact(pred);
    let (t, nt) = compact(truth);
    let n = np.max(nt);
    let mut agree = vec![vec![0.0; n]; n];
    for (&a, &b) in p.iter().zip(&t) {
        agree[a][b] += 1.0;
    }
    let cost: Vec<Vec<f64>> = agree.iter().map(|r| r.iter().map(|&c| -c).collect()).collect();
    let assign = min_cost_assignment(&cost);
    let matched: f64 = assign.iter().enumerate().map(|(r, &c)| agree[r][c]).sum();
    Ok(1.0 - matched / pred.len() as f64)
}

/// `||completed - truth||_F / ||truth||_F`.
pub fn completion_error<T: Real>(completed: &Matrix<T>, truth: &Matrix<T>) -> Result<T> {
    if completed.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "completed is {:?}, truth is {:?}",
            completed.shape(),
            truth.shape()
        )));
    }
    let nt = truth.frobenius_norm();
    if nt == T::zero() {
        return Err(Error::InvalidArgument("truth matrix is zero".into()));
    }
    Ok(completed.sub(truth)?.frobenius_norm() / nt)
}

fn check_orthonormal<T: Real>(m: &Matrix<T>, name: &str) -> Result<()> {
    let g = m.tr_matmul(m)?;
    let dev = g.sub(&Matrix::identity(m.cols()))?.max_abs();
    if dev > T::lit(1e-8) {
        return Err(Error::InvalidArgument(format!(
            "{name} does not have orthonormal columns (deviation {:e})",
            dev.to_f64_lossy()
        )));
    }
    Ok(())
}

/// `arcsin ||B - A A^T B||_2`, clamped to `[0, pi/2]`.
pub fn principal_angle_error<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "bases live in R^{} and R^{}",
            a.rows(),
            b.rows()
        )));
    }
    check_orthonormal(a, "first basis")?;
    check_orthonormal(b, "second basis")?;
    if b.cols() == 0 {
        return Ok(T::zero());
    }
    let resid = b.sub(&a.matmul(&a.tr_matmul(b)?)?)?;
    let s = thin_svd(&resid)?.s[0];
    Ok(s.min(T::one()).max(T::zero()).asin())
}

/// Principal angles between the spans of two orthonormal bases, ascending.
/// Each angle combines its cosine and sine so small and large angles are
/// both accurate.
pub fn principal_angles<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Vec<T>> {
    let (a, b) = if a.cols() >= b.cols() { (a, b) } else { (b, a) };
    if b.cols() == 0 {
        return Ok(Vec::new());
    }
    let ab = a.tr_matmul(b)?;
    let cos = thin_svd(&ab)?.s;
    let resid = b.sub(&a.matmul(&ab)?)?;
    let mut sin = thin_svd(&resid)?.s;
    sin.reverse();
    Ok(cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            let c = c.min(T::one()).max(-T::one());
            let s = s.min(T::one()).max(T::zero());
            s.atan2(c)
        })
        .collect())
}

/// `sqrt(|k - l| pi^2 / 4 + sum theta_i^2)` for a k- and an l-dimensional
/// subspace.
pub fn grassmann_error<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "bases live in R^{} and R^{}",
            a.rows(),
            b.rows()
        )));
    }
    check_orthonormal(a, "first basis")?;
    check_orthonormal(b, "second basis")?;
    let gap = T::of(a.cols().abs_diff(b.cols()));
    let half_pi = T::FRAC_PI_2();
    let sum: T = principal_angles(a, b)?.iter().map(|&t| t * t).sum();
    Ok((gap * half_pi * half_pi + sum).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceMetric {
    PrincipalAngle,
    Grassmann,
}

impl SubspaceMetric {
    pub fn eval<T: Real>(self, est: &Matrix<T>, truth: &Matrix<T>) -> Result<T> {
        match self {
            SubspaceMetric::PrincipalAngle => principal_angle_error(est, truth),
            SubspaceMetric::Grassmann => grassmann_error(est, truth),
        }
    }
}

impl FromStr for SubspaceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angle" | "principal-angle" => Ok(SubspaceMetric::PrincipalAngle),
            "grassmann" => Ok(SubspaceMetric::Grassmann),
            other => Err(Error::Parse(format!("unknown subspace metric {other:?}"))),
        }
    }
}

pub const MAX_MATCHED_SUBSPACES: usize = 8;

/// Visits every permutation of `0..n` (Heap's algorithm).
fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Bijection between estimated and true subspaces minimising the total
/// error. Returns `assignment[e] = t` and the mean error over pairs.
pub fn match_subspaces<T: Real>(
    est: &[Matrix<T>],
    truth: &[Matrix<T>],
    metric: SubspaceMetric,
) -> Result<(Vec<usize>, T)> {
    if est.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} estimated subspaces for {} true ones",
            est.len(),
            truth.len()
        )));
    }
    let n = est.len();
    if n > MAX_MATCHED_SUBSPACES {
        return Err(Error::InvalidArgument(format!(
            "at most {MAX_MATCHED_SUBSPACES} subspaces can be matched, got {n}"
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), T::zero()));
    }
    let mut cost = vec![vec![T::zero(); n]; n];
    for (e, row) in cost.iter_mut().enumerate() {
        for (t, c) in row.iter_mut().enumerate() {
            *c = metric.eval(&est[e], &truth[t])?;
        }
    }
    let mut best: Option<(Vec<usize>, T)> = None;
    for_each_permutation(n, |perm| {
        let total: T = perm.iter().enumerate().map(|(e, &t)| cost[e][t]).sum();
        if best.as_ref().is_none_or(|(_, b)| total < *b) {
            best = Some((perm.to_vec(), total));
        }
    });
    let (assign, total) = best.expect("at least one permutation");
    Ok((assign, total / T::of(n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::qr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_basis(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        qr(&Matrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0))).unwrap().q
    }

    fn exhaustive_error(pred: &[usize], truth: &[usize]) -> f64 {
        let (p, np) = compact(pred);
        let (t, nt) = compact(truth);
        let n = np.max(nt);
        let mut best = 0usize;
        for_each_permutation(n, |perm| {
            let hits = p.iter().zip(&t).filter(|(&a, &b)| perm[a] == b).count();
            best = best.max(hits);
        });
        1.0 - best as f64 / pred.len() as f64
    }

    #[test]
    fn clustering_error_cases() {
        let truth: Vec<usize> = (0..450).map(|i| i / 150).collect();
        assert_eq!(clustering_error(&truth, &truth).unwrap(), 0.0);
        let renamed: Vec<usize> = truth.iter().map(|&l| [7, 2, 9][l]).collect();
        assert_eq!(clustering_error(&renamed, &truth).unwrap(), 0.0);
        let mut one = truth.clone();
        one[10] = 2;
        assert!((clustering_error(&one, &truth).unwrap() - 1.0 / 450.0).abs() < 1e-15);
        assert!(clustering_error(&one[1..], &truth).is_err());
    }

    #[test]
    fn hungarian_matches_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.random_range(1..40);
            let kp = rng.random_range(1..6);
            let kt = rng.random_range(1..6);
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..kp)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..kt)).collect();
            let fast = clustering_error(&pred, &truth).unwrap();
            assert!((fast - exhaustive_error(&pred, &truth)).abs() < 1e-12);
            assert!((fast - clustering_error(&truth, &pred).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn completion_error_cases() {
        let t = Matrix::from_fn(3, 4, |r, c| (r + c) as f64 + 1.0);
        assert_eq!(completion_error(&t, &t).unwrap(), 0.0);
        assert_eq!(completion_error(&Matrix::zeros(3, 4), &t).unwrap(), 1.0);
        // rank-one perturbation s u v^T with unit u, v has Frobenius norm s
        let u = [0.6, 0.8, 0.0];
        let v = [0.5, 0.5, 0.5, 0.5];
        let pert = Matrix::from_fn(3, 4, |r, c| t[(r, c)] + 0.3 * u[r] * v[c]);
        let expect = 0.3 / t.frobenius_norm();
        assert!((completion_error(&pert, &t).unwrap() - expect).abs() < 1e-14);
        assert!(completion_error(&t, &Matrix::zeros(3, 4)).is_err());
    }

    #[test]
    fn rotation_angle() {
        let a = Matrix::from_rows(&[vec![1.0f64], vec![0.0], vec![0.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.3f64.cos()], vec![0.3f64.sin()], vec![0.0]]).unwrap();
        assert!((principal_angle_error(&a, &b).unwrap() - 0.3).abs() < 1e-10);
        assert!((grassmann_error(&a, &b).unwrap() - 0.3).abs() < 1e-10);
        assert_eq!(principal_angle_error(&a, &a).unwrap(), 0.0);
        let e2 = Matrix::from_rows(&[vec![0.0f64], vec![1.0], vec![0.0]]).unwrap();
        assert!((principal_angle_error(&a, &e2).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(principal_angle_error(&a, &a.scale(2.0)).is_err());
    }

    #[test]
    fn grassmann_dimension_term() {
        let plane = Matrix::from_rows(&[vec![1.0f64, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let line = Matrix::from_rows(&[vec![0.6f64], vec![0.8], vec![0.0]]).unwrap();
        let d = grassmann_error(&plane, &line).unwrap();
        assert!((d - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((grassmann_error(&line, &plane).unwrap() - d).abs() < 1e-12);
        assert!(grassmann_error(&plane, &plane).unwrap() < 1e-12);
    }

    /// Principal angles from the eigenvalues of `B^T A A^T B`.
    fn jordan_angles(a: &Matrix<f64>, b: &Matrix<f64>) -> Vec<f64> {
        let m = a.tr_matmul(b).unwrap();
        let g = m.tr_matmul(&m).unwrap();
        let mut ang: Vec<f64> = crate::numkit::sym_eig(&g)
            .unwrap()
            .values
            .iter()
            .map(|&l| l.clamp(0.0, 1.0).sqrt().acos())
            .collect();
        ang.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ang
    }

    #[test]
    fn random_pairs_and_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let a = random_basis(8, 3, &mut rng);
            let b = random_basis(8, 3, &mut rng);
            let ang = principal_angles(&a, &b).unwrap();
            let oracle = jordan_angles(&a, &b);
            for (x, y) in ang.iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-7);
            }
            let g = grassmann_error(&a, &b).unwrap();
            let rot = random_basis(3, 3, &mut rng);
            let a2 = a.matmul(&rot).unwrap();
            assert!((grassmann_error(&a2, &b).unwrap() - g).abs() < 1e-9);
            assert!((grassmann_error(&b, &a).unwrap() - g).abs() < 1e-9);
            let p = principal_angle_error(&a, &b).unwrap();
            assert!((principal_angle_error(&a2, &b.matmul(&rot).unwrap()).unwrap() - p).abs() < 1e-9);
            assert!((p - oracle[2]).abs() < 1e-7);
        }
    }

    #[test]
    fn subspace_matching() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth: Vec<Matrix<f64>> = (0..3).map(|_| random_basis(10, 2, &mut rng)).collect();
        let (assign, mean) = match_subspaces(&truth, &truth, SubspaceMetric::Grassmann).unwrap();
        assert_eq!(assign, vec![0, 1, 2]);
        assert!(mean < 1e-12);
        let swapped = vec![truth[1].clone(), truth[0].clone(), truth[2].clone()];
        let (assign, _) = match_subspaces(&swapped, &truth, SubspaceMetric::PrincipalAngle).unwrap();
        assert_eq!(assign, vec![1, 0, 2]);
        let est: Vec<Matrix<f64>> = (0..3).map(|_| random_basis(10, 2, &mut rng)).collect();
        let (assign, mean) = match_subspaces(&est, &truth, SubspaceMetric::Grassmann).unwrap();
        let mut best = f64::INFINITY;
        for p in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let tot: f64 = (0..3).map(|e| grassmann_error(&est[e], &truth[p[e]]).unwrap()).sum();
            best = best.min(tot);
        }
        assert!((mean * 3.0 - best).abs() < 1e-12);
        let tot: f64 = (0..3).map(|e| grassmann_error(&est[e], &truth[assign[e]]).unwrap()).sum();
        assert!((tot - best).abs() < 1e-12);
        assert!(match_subspaces(&est[..2], &truth, SubspaceMetric::Grassmann).is_err());
    }
}
