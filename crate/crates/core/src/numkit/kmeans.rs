//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult<T> {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    /// Within-cluster sum of squares of the returned labeling.
    pub inertia: T,
    /// Objective after each assignment step of the winning restart.
    pub history: Vec<T>,
}

/// Clusters the rows of `points` into `k` groups.
pub fn kmeans<T: Real>(
    points: &Matrix<T>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let cfg = KMeansConfig {
        restarts,
        seed,
        ..KMeansConfig::default()
    };
    Ok(kmeans_with(points, k, &cfg)?.labels)
}

pub fn kmeans_with<T: Real>(
    points: &Matrix<T>,
    k: usize,
    cfg: &KMeansConfig,
) -> Result<KMeansResult<T>> {
    let n = points.rows();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "{n} points cannot form {k} clusters"
        )));
    }
    points.check_finite()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansResult<T>> = None;
    for _ in 0..cfg.restarts.max(1) {
        let run = single_run(points, k, cfg.max_iter, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seed<T: Real>(points: &Matrix<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = points.rows();
    let mut centroids = vec![points.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<T> = (0..n)
        .map(|i| sq_dist(points.row(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: T = d2.iter().copied().sum();
        let pick = if total > T::zero() {
            let target = T::lit(rng.random::<f64>()) * total;
            let mut acc = T::zero();
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn single_run<T: Real>(
    points: &Matrix<T>,
    k: usize,
    max_iter: usize,
    rng: &mut ChaCha8Rng,
) -> KMeansResult<T> {
    let (n, dim) = points.shape();
    let mut centroids = plus_plus_seed(points, k, rng);
    let mut labels = vec![0usize; n];
    let mut history = Vec::new();
    let mut prev = T::infinity();
    for _ in 0..max_iter.max(1) {
        // assignment
        let mut inertia = T::zero();
        let mut dist = vec![T::zero(); n];
        for i in 0..n {
            let row = points.row(i);
            let (mut bl, mut bd) = (0, T::infinity());
            for (c, cen) in centroids.iter().enumerate() {
                let d = sq_dist(row, cen);
                if d < bd {
                    bd = d;
                    bl = c;
                }
            }
            labels[i] = bl;
            dist[i] = bd;
            inertia += bd;
        }
        // update
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, &v) in sums[labels[i]].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = T::one() / T::of(counts[c]);
                centroids[c] = sums[c].iter().map(|&s| s * inv).collect();
            } else {
                // Empty cluster: re-seed from the point farthest from its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(b.cmp(&a)))
                    .unwrap();
                centroids[c] = points.row(far).to_vec();
                inertia -= dist[far];
                dist[far] = T::zero();
                labels[far] = c;
            }
        }
        history.push(inertia);
        if inertia >= prev {
            break;
        }
        prev = inertia;
    }
    // final consistent objective for the returned labels
    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), &centroids[labels[i]]))
        .sum();
    let inertia = if inertia < *history.last().unwrap() {
        inertia
    } else {
        *history.last().unwrap()
    };
    KMeansResult {
        labels,
        centroids,
        inertia,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        a.len() == b.len()
            && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn separated_pairs() {
        let p = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![10.0, 10.0],
            vec![10.0, 10.1],
        ])
        .unwrap();
        let l = kmeans(&p, 2, 5, 1).unwrap();
        assert_eq!(l[0], l[1]);
        assert_eq!(l[2], l[3]);
        assert_ne!(l[0], l[2]);
        assert_eq!(kmeans(&p, 1, 3, 1).unwrap(), vec![0; 4]);
    }

    #[test]
    fn rejects_bad_k() {
        let p = Matrix::<f64>::zeros(2, 2);
        assert!(kmeans(&p, 0, 1, 0).is_err());
        assert!(kmeans(&p, 3, 1, 0).is_err());
    }

    #[test]
    fn matches_exhaustive_best_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let centers = [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)];
        let mut rows = Vec::new();
        for (cx, cy) in centers {
            for _ in 0..4 {
                let dx: f64 = StandardNormal.sample(&mut rng);
                let dy: f64 = StandardNormal.sample(&mut rng);
                rows.push(vec![cx + 0.3 * dx, cy + 0.3 * dy]);
            }
        }
        let p = Matrix::from_rows(&rows).unwrap();
        // exhaustive: all 3^12 labelings, objective = SSE to label means
        let n = rows.len();
        let mut best = (f64::INFINITY, vec![0; n]);
        let mut lab = vec![0usize; n];
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            for l in lab.iter_mut() {
                *l = c % 3;
                c /= 3;
            }
            let mut sse = 0.0;
            for g in 0..3 {
                let members: Vec<&Vec<f64>> = rows
                    .iter()
                    .zip(&lab)
                    .filter(|(_, &l)| l == g)
                    .map(|(r, _)| r)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let m = members.len() as f64;
                let mx = members.iter().map(|r| r[0]).sum::<f64>() / m;
                let my = members.iter().map(|r| r[1]).sum::<f64>() / m;
                sse += members
                    .iter()
                    .map(|r| (r[0] - mx).powi(2) + (r[1] - my).powi(2))
                    .sum::<f64>();
            }
            if sse < best.0 {
                best = (sse, lab.clone());
            }
        }
        let res = kmeans_with(
            &p,
            3,
            &KMeansConfig {
                restarts: 20,
                max_iter: 300,
                seed: 3,
            },
        )
        .unwrap();
        assert!(
            (res.inertia - best.0).abs() < 1e-9,
            "{} vs {}",
            res.inertia,
            best.0
        );
        assert!(same_partition(&res.labels, &best.1));
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p: Matrix<f64> = Matrix::from_fn(60, 3, |_, _| StandardNormal.sample(&mut rng));
        for seed in 0..10 {
            let r = kmeans_with(
                &p,
                4,
                &KMeansConfig {
                    restarts: 1,
                    max_iter: 300,
                    seed,
                },
            )
            .unwrap();
            assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
