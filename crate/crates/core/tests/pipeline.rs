use sscmiss::cluster::{affinity_ewzf, affinity_ewzf_oo, cluster, Algorithm, ClusterParams};
use sscmiss::complete::{complete_by_cluster, identify_subspace};
use sscmiss::geomcert::{check_thm_ewzf, check_thm_oo};
use sscmiss::metrics::{clustering_error, completion_error, match_subspaces, SubspaceMetric};
use sscmiss::uosgen::{generate_model, sample, GenerationMode, ObservedMatrix, SamplingPattern, SamplingSpec};
use sscmiss::Mat;

#[test]
fn well_separated_data_is_recovered_end_to_end() {
    let model = generate_model::<f64>(30, &[2, 2, 2], &[40, 40, 40], GenerationMode::Gaussian, 17)
        .unwrap()
        .normalized();
    let spec = SamplingSpec {
        pattern: SamplingPattern::PerColumnRandom,
        p: 0.8,
        seed: 4,
    };
    let x = sample(&model, &spec).unwrap();
    let params = ClusterParams { alpha: 7.34, q: 12 };
    let (labels, aff) = cluster(&x, Algorithm::EwzfOo, &params, 3, 1).unwrap();
    assert!(aff.diagnostics.all_certified());
    assert_eq!(clustering_error(&labels, &model.labels).unwrap(), 0.0);

    let done = complete_by_cluster(&x, &labels).unwrap();
    assert!(done.failures.is_empty());
    assert!(completion_error(&done.completed, &model.data).unwrap() < 1e-3);
    let est: Vec<Mat> = done
        .clusters
        .iter()
        .map(|&c| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == c).collect();
            identify_subspace(&done.completed.select_cols(&idx), 1e-6).unwrap()
        })
        .collect();
    assert!(est.iter().all(|b| b.cols() == 2));
    let (_, angle) = match_subspaces(&est, &model.bases, SubspaceMetric::PrincipalAngle).unwrap();
    let (_, grass) = match_subspaces(&est, &model.bases, SubspaceMetric::Grassmann).unwrap();
    assert!(angle < 1e-3 && grass < 1e-3, "{angle} {grass}");
}

#[test]
fn full_observation_makes_both_variants_coincide() {
    let model = generate_model::<f64>(12, &[2, 3], &[9, 9], GenerationMode::Sphere, 2).unwrap();
    let x = ObservedMatrix::fully_observed(&model.data);
    let a = affinity_ewzf(&x).unwrap();
    let b = affinity_ewzf_oo(&x).unwrap();
    assert_eq!(a.coeffs, b.coeffs);
}

/// Whenever a checker certifies a point, the solver's representation of
/// that point uses only its own subspace.
#[test]
fn certified_points_have_clean_support() {
    let mut certified = 0;
    for seed in 0..40 {
        let model = generate_model::<f64>(8, &[2, 2], &[10, 10], GenerationMode::Sphere, seed).unwrap();
        let spec = SamplingSpec {
            pattern: SamplingPattern::PerColumnRandom,
            p: 0.75,
            seed: seed + 1000,
        };
        let x = sample(&model, &spec).unwrap();
        let oo = affinity_ewzf_oo(&x).unwrap();
        let zf = affinity_ewzf(&x).unwrap();
        for ell in 0..2 {
            for (i, col) in model.members(ell).into_iter().enumerate() {
                if check_thm_oo(&model, &x, ell, i).is_ok_and(|r| r.holds) {
                    certified += 1;
                    assert!(oo.support(col).iter().all(|&j| model.labels[j] == ell));
                }
                if check_thm_ewzf(&model, &x, ell, i).is_ok_and(|r| r.holds) {
                    certified += 1;
                    assert!(zf.support(col).iter().all(|&j| model.labels[j] == ell));
                }
            }
        }
    }
    assert!(certified > 0);
}
