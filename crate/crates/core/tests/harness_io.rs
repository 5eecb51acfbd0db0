use std::fs;

use sscmiss::cluster::Algorithm;
use sscmiss::harness::{emit, read_sweep_csv, sweep, Metric, SweepConfig};

fn tiny() -> SweepConfig {
    SweepConfig {
        n: 10,
        subspaces: 2,
        dim: 2,
        per_cluster: 10,
        p_grid: vec![0.7, 1.0],
        algorithms: vec![Algorithm::EwzfOo, Algorithm::Tsc],
        trials: 2,
        base_seed: 5,
        ..SweepConfig::default()
    }
}

/// Checks that every `<tag ...>` is closed in order, which is all the
/// structure the charts use.
fn balanced_xml(text: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('<') {
        let Some(len) = rest[start..].find('>') else {
            return false;
        };
        let tag = &rest[start + 1..start + len];
        rest = &rest[start + len + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            if stack.pop().as_deref() != Some(name.trim()) {
                return false;
            }
        } else if !tag.ends_with('/') {
            let name = tag.split_whitespace().next().unwrap_or("").to_string();
            stack.push(name);
        }
    }
    stack.is_empty()
}

#[test]
fn emitted_files_round_trip() {
    let cfg = tiny();
    let res = sweep(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit(&res, dir.path(), true).unwrap();
    assert_eq!(files.len(), 2 + Metric::ALL.len());

    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("p,algorithm,metric,mean,std,trials\n"));
    let back = read_sweep_csv(&text).unwrap();
    assert_eq!(back.len(), res.rows.len());
    for (a, b) in back.iter().zip(&res.rows) {
        assert_eq!((a.p, a.algorithm, a.metric, a.trials), (b.p, b.algorithm, b.metric, b.trials));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std.to_bits(), b.std.to_bits());
    }

    for m in Metric::ALL {
        let svg = fs::read_to_string(dir.path().join(format!("{m}.svg"))).unwrap();
        assert!(balanced_xml(&svg), "{m}.svg is not well formed");
        assert_eq!(svg.matches("<polyline").count(), cfg.algorithms.len());
    }
    let trials = fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + res.records.len());
}

#[test]
fn identical_configs_give_identical_csv() {
    let cfg = tiny();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit(&sweep(&cfg).unwrap(), a.path(), false).unwrap();
    emit(&sweep(&cfg).unwrap(), b.path(), false).unwrap();
    let fa = fs::read(a.path().join("sweep.csv")).unwrap();
    let fb = fs::read(b.path().join("sweep.csv")).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn empty_result_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    emit(&Default::default(), dir.path(), true).unwrap();
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text, "p,algorithm,metric,mean,std,trials\n");
    assert!(!dir.path().join("clustering.svg").exists());
}

#[test]
fn config_file_drives_the_sweep() {
    let text = "# two tiny subspaces\nn = 10\nL = 2\nd = 2\nper_cluster = 10\n\
                p_grid = 1.0\nalgorithms = ewzf-oo\nmetrics = clustering,completion\ntrials = 1\n";
    let cfg = SweepConfig::from_text(text).unwrap();
    let res = sweep(&cfg).unwrap();
    assert_eq!(res.rows.len(), 2);
    assert_eq!(res.mean(1.0, Algorithm::EwzfOo, Metric::Clustering), Some(0.0));
    assert_eq!(res.mean(1.0, Algorithm::EwzfOo, Metric::Completion), Some(0.0));
}
