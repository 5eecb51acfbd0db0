use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use sscmiss::cluster::{build_affinity, cluster, default_tsc_q, Algorithm, ClusterParams};
use sscmiss::complete::{complete_by_cluster, identify_subspace};
use sscmiss::geomcert::{check_thm_ewzf, check_thm_oo, check_thm_same_location, write_certificate_report};
use sscmiss::harness::{data_seed, emit, mask_seed, sweep, Pattern, SweepConfig};
use sscmiss::io::{read_labels, read_mask, read_matrix, write_labels, write_mask, write_matrix};
use sscmiss::metrics::{clustering_error, completion_error, match_subspaces, SubspaceMetric};
use sscmiss::uosgen::{generate_model, sample, GenerationMode, ObservedMatrix, SamplingSpec};
use sscmiss::{Mat, Model, Observed};

#[derive(Parser)]
#[command(name = "sscmiss", version, about = "Sparse subspace clustering with missing entries")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a union-of-subspaces data set and an observation mask.
    Generate(Flags),
    /// Cluster a generated data set (reads data.csv and mask.csv).
    Cluster(Flags),
    /// Evaluate the success conditions for the first points of each subspace.
    Certify {
        #[command(flatten)]
        flags: Flags,
        /// Points checked per subspace.
        #[arg(long, default_value_t = 3)]
        columns: usize,
    },
    /// Complete the data cluster by cluster (reads pred_labels.csv).
    Complete(Flags),
    /// Report every available metric for a data directory.
    Eval(Flags),
    /// Run a sweep over sampling ratios and write sweep.csv (and charts).
    Sweep(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// Key = value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data directory for cluster/complete/eval (defaults to --out).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "L")]
    subspaces: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    per_cluster: Option<usize>,
    /// same | random
    #[arg(long)]
    pattern: Option<String>,
    /// Single sampling ratio.
    #[arg(long)]
    p: Option<String>,
    /// a:b:step or comma list.
    #[arg(long)]
    p_grid: Option<String>,
    /// Comma list of ewzf, ewzf-oo, ewzf-oo-lasso, tsc.
    #[arg(long)]
    algo: Option<String>,
    /// Comma list of clustering, completion, angle, grassmann.
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    normalize_columns: bool,
    #[arg(long)]
    stop_at_zero: bool,
}

impl Flags {
    fn config(&self) -> Result<SweepConfig> {
        let mut cfg = SweepConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text)?;
        }
        let mut set = |k: &str, v: Option<String>| -> Result<()> {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
            Ok(())
        };
        set("n", self.n.map(|v| v.to_string()))?;
        set("L", self.subspaces.map(|v| v.to_string()))?;
        set("d", self.d.map(|v| v.to_string()))?;
        set("per_cluster", self.per_cluster.map(|v| v.to_string()))?;
        set("pattern", self.pattern.clone())?;
        set("p_grid", self.p_grid.clone())?;
        set("p_grid", self.p.clone())?;
        set("algorithms", self.algo.clone())?;
        set("metrics", self.metrics.clone())?;
        set("alpha", self.alpha.map(|v| v.to_string()))?;
        set("trials", self.trials.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.svg |= self.svg;
        cfg.normalize_columns |= self.normalize_columns;
        cfg.stop_at_zero |= self.stop_at_zero;
        cfg.validate()?;
        Ok(cfg)
    }

    fn input(&self, cfg: &SweepConfig) -> PathBuf {
        self.input.clone().unwrap_or_else(|| cfg.out.clone())
    }
}

/// Trial 0 of the configured experiment at the first grid value.
fn draw(cfg: &SweepConfig) -> Result<(Model, Observed, f64)> {
    let p = cfg.p_grid[0];
    let dims = vec![cfg.dim; cfg.subspaces];
    let counts = vec![cfg.per_cluster; cfg.subspaces];
    let mut model = generate_model(cfg.n, &dims, &counts, GenerationMode::Gaussian, data_seed(cfg.base_seed, 0))?;
    if cfg.normalize_columns {
        model = model.normalized();
    }
    let spec = SamplingSpec {
        pattern: cfg.pattern.sampling(),
        p,
        seed: mask_seed(cfg.base_seed, 0, p),
    };
    let obs = sample(&model, &spec)?;
    Ok((model, obs, p))
}

fn load_observed(dir: &Path) -> Result<Observed> {
    let data: Mat = read_matrix(dir.join("data.csv")).context("reading data.csv")?;
    let (mask, rows, cols) = read_mask(dir.join("mask.csv")).context("reading mask.csv")?;
    if (rows, cols) != data.shape() {
        bail!("mask is {rows}x{cols} but data is {:?}", data.shape());
    }
    Ok(ObservedMatrix::new(&data, mask)?)
}

fn single_algorithm(cfg: &SweepConfig) -> Result<Algorithm> {
    match cfg.algorithms.as_slice() {
        [a] => Ok(*a),
        _ => bail!("choose one algorithm with --algo"),
    }
}

fn generate(flags: &Flags) -> Result<()> {
    let cfg = flags.config()?;
    let (model, obs, p) = draw(&cfg)?;
    fs::create_dir_all(&cfg.out)?;
    write_matrix(cfg.out.join("truth.csv"), &model.data)?;
    write_matrix(cfg.out.join("data.csv"), obs.values())?;
    write_mask(cfg.out.join("mask.csv"), obs.mask(), obs.rows(), obs.cols())?;
    write_labels(cfg.out.join("labels.csv"), &model.labels)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    println!(
        "wrote {} points in R^{} ({} subspaces of dimension {}), {} sampling at p = {p}, to {}",
        model.num_points(),
        cfg.n,
        cfg.subspaces,
        cfg.dim,
        cfg.pattern,
        cfg.out.display()
    );
    Ok(())
}

fn run_cluster(flags: &Flags) -> Result<()> {
    let cfg = flags.config()?;
    let dir = flags.input(&cfg);
    let algo = single_algorithm(&cfg)?;
    let obs = load_observed(&dir)?;
    let params = ClusterParams {
        alpha: cfg.alpha,
        q: default_tsc_q(obs.cols() / cfg.subspaces.max(1)),
    };
    let (labels, aff) = cluster(&obs, algo, &params, cfg.subspaces, cfg.base_seed)?;
    write_labels(dir.join("pred_labels.csv"), &labels)?;
    write_matrix(dir.join("affinity.csv"), &aff.sym)?;
    let d = &aff.diagnostics;
    println!(
        "{algo}: {} solves, {} failed, worst relative gap {:.1e}, worst sign violation {:.1e}",
        d.solves,
        d.failures.len(),
        d.max_rel_gap,
        d.max_sign_violation
    );
    if let Ok(truth) = read_labels(dir.join("labels.csv")) {
        println!("clustering error {}", clustering_error(&labels, &truth)?);
    }
    Ok(())
}

fn certify(flags: &Flags, columns: usize) -> Result<()> {
    let cfg = flags.config()?;
    let (model, obs, p) = draw(&cfg)?;
    let algo = single_algorithm(&cfg).unwrap_or(Algorithm::EwzfOo);
    let params = ClusterParams {
        alpha: cfg.alpha,
        q: default_tsc_q(cfg.per_cluster),
    };
    let aff = match algo {
        Algorithm::Ewzf | Algorithm::EwzfOo => build_affinity(&obs, algo, &params)?,
        other => bail!("certificates exist for ewzf and ewzf-oo only, not {other}"),
    };
    let mut reports = Vec::new();
    for ell in 0..model.num_subspaces() {
        let members = model.members(ell);
        for i in 0..columns.min(members.len()) {
            let rep = match (algo, cfg.pattern) {
                (_, Pattern::Same) => check_thm_same_location(&model, &obs, ell, i)?,
                (Algorithm::EwzfOo, _) => check_thm_oo(&model, &obs, ell, i)?,
                _ => check_thm_ewzf(&model, &obs, ell, i)?,
            };
            let col = members[i];
            let clean = aff.support(col).iter().all(|&j| model.labels[j] == ell);
            println!(
                "subspace {ell} point {i}: condition {} (margin {:+.3e}), support in cluster: {clean}",
                if rep.holds { "holds" } else { "fails" },
                rep.margin
            );
            reports.push(rep);
        }
    }
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("certificates.csv");
    write_certificate_report(&path, &reports)?;
    println!(
        "{} of {} checked points certified at p = {p}; details in {}",
        reports.iter().filter(|r| r.holds).count(),
        reports.len(),
        path.display()
    );
    Ok(())
}

fn complete(flags: &Flags) -> Result<()> {
    let cfg = flags.config()?;
    let dir = flags.input(&cfg);
    let obs = load_observed(&dir)?;
    let labels = read_labels(dir.join("pred_labels.csv")).context("reading pred_labels.csv (run cluster first)")?;
    let res = complete_by_cluster(&obs, &labels)?;
    write_matrix(dir.join("completed.csv"), &res.completed)?;
    for (k, &c) in res.clusters.iter().enumerate() {
        println!(
            "cluster {c}: rank {}, {} iterations, converged {}",
            res.per_cluster_rank[k], res.iterations[k], res.converged[k]
        );
    }
    for (c, msg) in &res.failures {
        println!("cluster {c} left zero-filled: {msg}");
    }
    Ok(())
}

fn cluster_bases(m: &Mat, labels: &[usize], tol: f64) -> Result<Vec<Mat>> {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|&c| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == c).collect();
            Ok(identify_subspace(&m.select_cols(&idx), tol)?)
        })
        .collect()
}

fn eval(flags: &Flags) -> Result<()> {
    let cfg = flags.config()?;
    let dir = flags.input(&cfg);
    let truth_labels = read_labels(dir.join("labels.csv")).context("reading labels.csv")?;
    let pred = read_labels(dir.join("pred_labels.csv")).context("reading pred_labels.csv")?;
    println!("clustering error   {}", clustering_error(&pred, &truth_labels)?);
    let (Ok(truth), Ok(completed)) = (
        read_matrix::<f64>(dir.join("truth.csv")),
        read_matrix::<f64>(dir.join("completed.csv")),
    ) else {
        return Ok(());
    };
    println!("completion error   {}", completion_error(&completed, &truth)?);
    let true_bases = cluster_bases(&truth, &truth_labels, cfg.rank_tol)?;
    let est = cluster_bases(&completed, &pred, cfg.rank_tol)?;
    for (name, metric) in [("angle", SubspaceMetric::PrincipalAngle), ("grassmann", SubspaceMetric::Grassmann)] {
        match match_subspaces(&est, &true_bases, metric) {
            Ok((_, v)) => println!("{name:<9} error    {v}"),
            Err(e) => println!("{name:<9} error    unavailable: {e}"),
        }
    }
    Ok(())
}

fn run_sweep(flags: &Flags) -> Result<()> {
    let cfg = flags.config()?;
    info!("sweep over {} grid values, {} trials each", cfg.p_grid.len(), cfg.trials);
    let res = sweep(&cfg)?;
    let files = emit(&res, &cfg.out, cfg.svg)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    for &algo in &cfg.algorithms {
        for &metric in &cfg.metrics {
            match res.threshold(algo, metric, cfg.zero_tol(metric)) {
                Some(p) => println!("{algo:<14} {metric:<10} zero from p = {p}"),
                None => println!("{algo:<14} {metric:<10} never zero on the grid"),
            }
        }
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match &cli.cmd {
        Cmd::Generate(f) => generate(f),
        Cmd::Cluster(f) => run_cluster(f),
        Cmd::Certify { flags, columns } => certify(flags, *columns),
        Cmd::Complete(f) => complete(f),
        Cmd::Eval(f) => eval(f),
        Cmd::Sweep(f) => run_sweep(f),
    }
}
