//! Experiment orchestration: data generation, sampling, clustering,
//! completion and evaluation over a grid of sampling ratios, with CSV and
//! SVG output.

mod config;
mod report;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{debug, info};

use crate::cluster::{cluster, default_tsc_q, Algorithm, ClusterParams, SolveDiagnostics};
use crate::complete::{complete_by_cluster, identify_subspace};
use crate::metrics::{clustering_error, completion_error, match_subspaces, SubspaceMetric};
use crate::numkit::Matrix;
use crate::uosgen::{generate_model, sample, GenerationMode, SamplingSpec};

pub use config::{parse_grid, Metric, Pattern, SweepConfig};
pub use report::{emit, read_sweep_csv, sweep_csv, svg_chart, trials_csv};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix(a ^ splitmix(b))
}

/// Seed of the ground-truth data of a trial. It does not depend on `p` or
/// the algorithm, so every curve sees the same data sets.
pub fn data_seed(base: u64, trial: usize) -> u64 {
    mix(base, trial as u64)
}

/// Seed of the observation mask of a trial at sampling ratio `p`.
pub fn mask_seed(base: u64, trial: usize, p: f64) -> u64 {
    mix(data_seed(base, trial), p.to_bits())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub p: f64,
    pub algorithm: Algorithm,
    pub trial: usize,
    pub clustering: f64,
    pub completion: f64,
    pub angle: f64,
    pub grassmann: f64,
    /// Empty on success, otherwise the first failing stage and its error.
    pub reason: String,
    pub diagnostics: SolveDiagnostics,
}

impl TrialRecord {
    fn failed(p: f64, algorithm: Algorithm, trial: usize, reason: String) -> Self {
        Self {
            p,
            algorithm,
            trial,
            clustering: f64::NAN,
            completion: f64::NAN,
            angle: f64::NAN,
            grassmann: f64::NAN,
            reason,
            diagnostics: SolveDiagnostics::default(),
        }
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Clustering => self.clustering,
            Metric::Completion => self.completion,
            Metric::Angle => self.angle,
            Metric::Grassmann => self.grassmann,
        }
    }
}

/// One trial: generate, sample, cluster and, when the config asks for any
/// completion-based metric, complete and compare subspaces. Failures never
/// propagate; they leave NaN metrics and a reason.
pub fn run_trial(cfg: &SweepConfig, p: f64, algo: Algorithm, trial: usize) -> TrialRecord {
    let mut rec = TrialRecord::failed(p, algo, trial, String::new());
    let dims = vec![cfg.dim; cfg.subspaces];
    let counts = vec![cfg.per_cluster; cfg.subspaces];
    let seed = data_seed(cfg.base_seed, trial);
    let model = match generate_model::<f64>(cfg.n, &dims, &counts, GenerationMode::Gaussian, seed) {
        Ok(m) if cfg.normalize_columns => m.normalized(),
        Ok(m) => m,
        Err(e) => return TrialRecord::failed(p, algo, trial, format!("generate: {e}")),
    };
    let spec = SamplingSpec {
        pattern: cfg.pattern.sampling(),
        p,
        seed: mask_seed(cfg.base_seed, trial, p),
    };
    let obs = match sample(&model, &spec) {
        Ok(o) => o,
        Err(e) => return TrialRecord::failed(p, algo, trial, format!("sample: {e}")),
    };
    let params = ClusterParams {
        alpha: cfg.alpha,
        q: default_tsc_q(cfg.per_cluster),
    };
    let labels = match cluster(&obs, algo, &params, cfg.subspaces, mix(seed, 3)) {
        Ok((labels, aff)) => {
            rec.diagnostics = aff.diagnostics;
            labels
        }
        Err(e) => return TrialRecord::failed(p, algo, trial, format!("cluster: {e}")),
    };
    match clustering_error(&labels, &model.labels) {
        Ok(v) => rec.clustering = v,
        Err(e) => {
            rec.reason = format!("clustering error: {e}");
            return rec;
        }
    }
    if !cfg.wants_completion() {
        return rec;
    }
    let done = match complete_by_cluster(&obs, &labels) {
        Ok(c) => c,
        Err(e) => {
            rec.reason = format!("complete: {e}");
            return rec;
        }
    };
    if let Some((c, msg)) = done.failures.first() {
        rec.reason = format!("complete: cluster {c}: {msg}");
    }
    match completion_error(&done.completed, &model.data) {
        Ok(v) => rec.completion = v,
        Err(e) => {
            rec.reason = format!("completion error: {e}");
            return rec;
        }
    }
    let mut est: Vec<Matrix<f64>> = Vec::with_capacity(done.clusters.len());
    for &c in &done.clusters {
        let idx: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == c).collect();
        match identify_subspace(&done.completed.select_cols(&idx), cfg.rank_tol) {
            Ok(b) => est.push(b),
            Err(e) => {
                rec.reason = format!("identify cluster {c}: {e}");
                return rec;
            }
        }
    }
    for (metric, slot) in [
        (SubspaceMetric::PrincipalAngle, &mut rec.angle),
        (SubspaceMetric::Grassmann, &mut rec.grassmann),
    ] {
        match match_subspaces(&est, &model.bases, metric) {
            Ok((_, v)) => *slot = v,
            Err(e) => {
                if rec.reason.is_empty() {
                    rec.reason = format!("match subspaces: {e}");
                }
            }
        }
    }
    rec
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub p: f64,
    pub algorithm: Algorithm,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    /// Trials with a finite value; only these enter the mean.
    pub trials: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
}

/// Mean and sample standard deviation of the finite values.
pub fn mean_std(values: &[f64]) -> (f64, f64, usize) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let k = finite.len();
    if k == 0 {
        return (f64::NAN, 0.0, 0);
    }
    let mean = finite.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0, 1);
    }
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, var.sqrt(), k)
}

impl SweepResult {
    pub fn row(&self, p: f64, algo: Algorithm, metric: Metric) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.p == p && r.algorithm == algo && r.metric == metric)
    }

    pub fn mean(&self, p: f64, algo: Algorithm, metric: Metric) -> Option<f64> {
        self.row(p, algo, metric).map(|r| r.mean)
    }

    /// Smallest grid value whose mean metric is at most `tol`.
    pub fn threshold(&self, algo: Algorithm, metric: Metric, tol: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.algorithm == algo && r.metric == metric && r.mean <= tol)
            .map(|r| r.p)
            .reduce(f64::min)
    }

    /// Solve diagnostics merged over every trial of `algo`.
    pub fn diagnostics(&self, algo: Algorithm) -> SolveDiagnostics {
        let mut d = SolveDiagnostics::default();
        for r in self.records.iter().filter(|r| r.algorithm == algo) {
            d.merge(&r.diagnostics);
        }
        d
    }
}

fn run_trials(cfg: &SweepConfig, p: f64, algo: Algorithm) -> Vec<TrialRecord> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cfg.trials);
    if workers <= 1 {
        return (0..cfg.trials).map(|t| run_trial(cfg, p, algo, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<TrialRecord>>> = Mutex::new(vec![None; cfg.trials]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                if t >= cfg.trials {
                    break;
                }
                let rec = run_trial(cfg, p, algo, t);
                slots.lock().expect("no poisoned lock")[t] = Some(rec);
            });
        }
    });
    slots
        .into_inner()
        .expect("no poisoned lock")
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect()
}

/// Runs every (p, algorithm, trial) combination and aggregates per
/// (p, algorithm, metric). With `stop_at_zero`, an algorithm's remaining
/// grid values are skipped once its mean clustering error reaches zero.
pub fn sweep(cfg: &SweepConfig) -> crate::Result<SweepResult> {
    cfg.validate()?;
    let mut out = SweepResult::default();
    for (ai, &algo) in cfg.algorithms.iter().enumerate() {
        for &p in &cfg.p_grid {
            let recs = run_trials(cfg, p, algo);
            let mut zero = false;
            for &metric in &cfg.metrics {
                let vals: Vec<f64> = recs.iter().map(|r| r.metric(metric)).collect();
                let (mean, std, trials) = mean_std(&vals);
                if metric == Metric::Clustering && mean <= cfg.clustering_tol {
                    zero = true;
                }
                out.rows.push(SummaryRow {
                    p,
                    algorithm: algo,
                    metric,
                    mean,
                    std,
                    trials,
                });
            }
            for r in recs.iter().filter(|r| !r.reason.is_empty()) {
                debug!("{algo} p={p} trial {}: {}", r.trial, r.reason);
            }
            info!(
                "[{}/{}] {algo} p={p}: clustering {}",
                ai + 1,
                cfg.algorithms.len(),
                mean_std(&recs.iter().map(|r| r.clustering).collect::<Vec<_>>()).0
            );
            out.records.extend(recs);
            if cfg.stop_at_zero && zero {
                break;
            }
        }
    }
    let algo_pos = |a: Algorithm| cfg.algorithms.iter().position(|&b| b == a);
    let metric_pos = |m: Metric| cfg.metrics.iter().position(|&n| n == m);
    out.rows.sort_by(|x, y| {
        x.p.total_cmp(&y.p)
            .then(algo_pos(x.algorithm).cmp(&algo_pos(y.algorithm)))
            .then(metric_pos(x.metric).cmp(&metric_pos(y.metric)))
    });
    out.records.sort_by(|x, y| {
        x.p.total_cmp(&y.p)
            .then(algo_pos(x.algorithm).cmp(&algo_pos(y.algorithm)))
            .then(x.trial.cmp(&y.trial))
    });
    Ok(out)
}
