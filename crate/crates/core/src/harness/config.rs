use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cluster::Algorithm;
use crate::error::{Error, Result};
use crate::uosgen::SamplingPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pattern {
    /// All columns observed on the first `round(p n)` coordinates.
    Same,
    /// Each column observed on its own random subset.
    Random,
}

impl Pattern {
    pub fn sampling(self) -> SamplingPattern {
        match self {
            Pattern::Same => SamplingPattern::SameLocation,
            Pattern::Random => SamplingPattern::PerColumnRandom,
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Pattern::Same => parse_grid("0.08:0.26:0.02").expect("valid grid"),
            Pattern::Random => parse_grid("0.30:0.95:0.05").expect("valid grid"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Same => "same",
            Pattern::Random => "random",
        }
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "same" => Ok(Pattern::Same),
            "random" => Ok(Pattern::Random),
            other => Err(Error::Parse(format!("unknown pattern {other:?} (same|random)"))),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Clustering,
    Completion,
    Angle,
    Grassmann,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Clustering,
        Metric::Completion,
        Metric::Angle,
        Metric::Grassmann,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Clustering => "clustering",
            Metric::Completion => "completion",
            Metric::Angle => "angle",
            Metric::Grassmann => "grassmann",
        }
    }

    pub fn needs_completion(self) -> bool {
        self != Metric::Clustering
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown metric {s:?}")))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid values are rounded to this many decimals so that `a + i step`
/// prints and compares cleanly.
const GRID_DECIMALS: i32 = 9;

fn round_grid(v: f64) -> f64 {
    let s = 10f64.powi(GRID_DECIMALS);
    (v * s).round() / s
}

/// `a:b:step` (inclusive of `b` when it lies on the grid) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number {:?} in grid {s:?}", t.trim())))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || b < a {
                return Err(Error::Parse(format!("grid {s:?} needs a <= b and step > 0")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| round_grid(a + i as f64 * step)).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(Error::Parse(format!("cannot parse grid {s:?}"))),
    };
    check_grid(&grid)?;
    Ok(grid)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty p grid".into()));
    }
    if let Some(p) = grid.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::InvalidArgument(format!("grid value {p} not in (0, 1]")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("p grid must be strictly increasing".into()));
    }
    Ok(())
}

fn parse_list<V: FromStr<Err = Error>>(s: &str) -> Result<Vec<V>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(V::from_str)
        .collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::Parse(format!("expected a boolean, found {other:?}"))),
    }
}

fn parse_num<V: FromStr>(key: &str, s: &str) -> Result<V> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{key}: cannot parse {:?}", s.trim())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Ambient dimension.
    pub n: usize,
    /// Number of subspaces.
    pub subspaces: usize,
    /// Dimension of every subspace.
    pub dim: usize,
    pub per_cluster: usize,
    pub pattern: Pattern,
    pub p_grid: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub metrics: Vec<Metric>,
    pub trials: usize,
    pub base_seed: u64,
    /// LASSO tuning constant.
    pub alpha: f64,
    /// Zero-error tolerance for clustering error.
    pub clustering_tol: f64,
    /// Zero-error tolerance for completion and subspace errors.
    pub error_tol: f64,
    /// Rank cut-off, relative to the largest singular value, when reading
    /// subspaces off completed clusters.
    pub rank_tol: f64,
    /// Rescale every generated data column to unit norm before sampling.
    pub normalize_columns: bool,
    /// Skip the remaining grid values of an algorithm once its mean
    /// clustering error is zero.
    pub stop_at_zero: bool,
    pub out: PathBuf,
    pub svg: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: 50,
            subspaces: 3,
            dim: 3,
            per_cluster: 150,
            pattern: Pattern::Random,
            p_grid: Pattern::Random.default_grid(),
            algorithms: Algorithm::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            trials: 20,
            base_seed: 1,
            alpha: 7.34,
            clustering_tol: 1e-12,
            error_tol: 1e-3,
            rank_tol: 1e-6,
            normalize_columns: false,
            stop_at_zero: false,
            out: PathBuf::from("out"),
            svg: false,
        }
    }
}

impl SweepConfig {
    pub const KEYS: [&'static str; 18] = [
        "n",
        "L",
        "d",
        "per_cluster",
        "pattern",
        "p_grid",
        "algorithms",
        "metrics",
        "trials",
        "seed",
        "alpha",
        "clustering_tol",
        "error_tol",
        "rank_tol",
        "normalize_columns",
        "stop_at_zero",
        "out",
        "svg",
    ];

    /// Sets one field from its textual form. Dashes and underscores in the
    /// key are interchangeable. Changing the pattern resets the grid to that
    /// pattern's default.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "n" => self.n = parse_num(&key, v)?,
            "L" | "subspaces" => self.subspaces = parse_num(&key, v)?,
            "d" | "dim" => self.dim = parse_num(&key, v)?,
            "per_cluster" => self.per_cluster = parse_num(&key, v)?,
            "pattern" => {
                self.pattern = v.parse()?;
                self.p_grid = self.pattern.default_grid();
            }
            "p_grid" | "p" => self.p_grid = parse_grid(v)?,
            "algorithms" | "algo" => self.algorithms = parse_list(v)?,
            "metrics" => self.metrics = parse_list(v)?,
            "trials" => self.trials = parse_num(&key, v)?,
            "seed" => self.base_seed = parse_num(&key, v)?,
            "alpha" => self.alpha = parse_num(&key, v)?,
            "clustering_tol" => self.clustering_tol = parse_num(&key, v)?,
            "error_tol" => self.error_tol = parse_num(&key, v)?,
            "rank_tol" => self.rank_tol = parse_num(&key, v)?,
            "normalize_columns" => self.normalize_columns = parse_bool(v)?,
            "stop_at_zero" => self.stop_at_zero = parse_bool(v)?,
            "out" => self.out = PathBuf::from(v),
            "svg" => self.svg = parse_bool(v)?,
            other => return Err(Error::Parse(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and text
    /// after `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", ln + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config file text that `from_text` reads back to `self`.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let grid: Vec<String> = self.p_grid.iter().map(|p| p.to_string()).collect();
        let algos = self.algorithms.iter().map(|a| a.to_string()).collect();
        let metrics = self.metrics.iter().map(|m| m.to_string()).collect();
        format!(
            "n = {}\nL = {}\nd = {}\nper_cluster = {}\npattern = {}\np_grid = {}\n\
             algorithms = {}\nmetrics = {}\ntrials = {}\nseed = {}\nalpha = {}\n\
             clustering_tol = {:e}\nerror_tol = {:e}\nrank_tol = {:e}\nnormalize_columns = {}\nstop_at_zero = {}\n\
             out = {}\nsvg = {}\n",
            self.n,
            self.subspaces,
            self.dim,
            self.per_cluster,
            self.pattern,
            grid.join(","),
            join(algos),
            join(metrics),
            self.trials,
            self.base_seed,
            self.alpha,
            self.clustering_tol,
            self.error_tol,
            self.rank_tol,
            self.normalize_columns,
            self.stop_at_zero,
            self.out.display(),
            self.svg
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 || self.subspaces == 0 || self.per_cluster == 0 {
            return bad("n, L and per_cluster must be positive".into());
        }
        if self.dim == 0 || self.dim > self.n {
            return bad(format!("subspace dimension {} not in 1..={}", self.dim, self.n));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.algorithms.is_empty() || self.metrics.is_empty() {
            return bad("need at least one algorithm and one metric".into());
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol <= 1.0) {
            return bad(format!("rank_tol {} not in (0, 1]", self.rank_tol));
        }
        check_grid(&self.p_grid)
    }

    pub fn zero_tol(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Clustering => self.clustering_tol,
            _ => self.error_tol,
        }
    }

    pub fn wants_completion(&self) -> bool {
        self.metrics.iter().any(|m| m.needs_completion())
    }
}
