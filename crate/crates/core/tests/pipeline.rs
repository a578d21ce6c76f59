use nalgebra::DVector;
use rayon::prelude::*;

use postshrink::bench::cv_prediction_error;
use postshrink::dataset::simulate_case;
use postshrink::rng::derive_seed;
use postshrink::selection::{restricted_ls, select, SelectionConfig};
use postshrink::shrinkage::{run_pipeline, shrink_stage, Estimator, PipelineConfig, Sigma2Mode};
use postshrink::wridge::{compute_an, compute_rn, cv_tune, fit_wr, fold_assignment, CvGrid};
use postshrink::{linalg, Case, Method, TuningConfig};

#[test]
fn lasso_keeps_the_strong_set() {
    let cfg = SelectionConfig::with_method(Method::Lasso);
    let hits = (0..200u64)
        .into_par_iter()
        .filter(|&i| {
            let (data, truth) = simulate_case(Case::One, 200, 200, 1.0, derive_seed(77, &[i])).unwrap();
            truth.partition.s1.is_subset(&select(&data, &cfg).unwrap().s1)
        })
        .count();
    assert!(hits >= 180, "S1 inside the selected set in {hits} of 200");
}

#[test]
fn adaptive_lasso_keeps_the_strong_set() {
    let cfg = SelectionConfig::with_method(Method::AdaptiveLasso);
    let hits = (0..50u64)
        .into_par_iter()
        .filter(|&i| {
            let (data, truth) = simulate_case(Case::One, 200, 100, 1.0, derive_seed(78, &[i])).unwrap();
            truth.partition.s1.is_subset(&select(&data, &cfg).unwrap().s1)
        })
        .count();
    assert!(hits >= 45, "S1 inside the selected set in {hits} of 50");
}

/// Direct re-computation of every grid score through the one-shot API.
#[test]
fn cv_tune_matches_exhaustive_search() {
    let (data, truth) = simulate_case(Case::One, 90, 60, 1.0, 5).unwrap();
    let s1 = truth.partition.s1.clone();
    let grid = CvGrid {
        c1: vec![0.3, 0.6, 1.5],
        c2: vec![0.05, 2.0],
    };
    let base = TuningConfig {
        cv_folds: 4,
        seed: 11,
        ..TuningConfig::default()
    };
    let out = cv_tune(&data, &s1, &grid, &base).unwrap();

    let folds = fold_assignment(data.n(), 4, 11);
    let mut scored = Vec::new();
    for &c1 in &grid.c1 {
        for &c2 in &grid.c2 {
            let mut sse = 0.0;
            for test in &folds {
                let train_rows: Vec<usize> = (0..data.n()).filter(|i| !test.contains(i)).collect();
                let train = data.subset_rows(&train_rows).unwrap();
                let an = compute_an(train.n(), c1, base.alpha).unwrap();
                let rn = compute_rn(train.n(), data.p(), an, c2).unwrap();
                let wr = fit_wr(&train, &s1, rn, an).unwrap();
                let re = restricted_ls(&train, &s1).unwrap();
                let stage = shrink_stage(&train, &wr, &re, Sigma2Mode::WeakOnly).unwrap();
                let beta = linalg::embed(data.p(), &s1, &stage.pse);
                let pred = train.predict_raw(&data.raw_rows(test), &beta);
                sse += (data.raw_response(test) - pred).norm_squared();
            }
            let score = sse / data.n() as f64;
            let cand = out.candidates.iter().find(|c| c.c1 == c1 && c.c2 == c2).unwrap();
            assert!((cand.score - score).abs() <= 1e-9 * score.max(1.0), "({c1}, {c2}): {} vs {score}", cand.score);
            let an = compute_an(data.n(), c1, base.alpha).unwrap();
            scored.push((score, compute_rn(data.n(), data.p(), an, c2).unwrap(), c1, c2));
        }
    }
    // equal scores go to the smaller full-sample r_n
    let best = scored
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .unwrap();
    assert_eq!((out.tuning.c1, out.tuning.c2), (best.2, best.3));
}

#[test]
fn prediction_report_is_consistent() {
    let (data, _) = simulate_case(Case::One, 120, 60, 1.0, 9).unwrap();
    let cfg = PipelineConfig::new(Method::Lasso, TuningConfig::default());
    let report = cv_prediction_error(&data, &cfg, 12, 0.7, 3).unwrap();
    assert_eq!(report.errors.len(), 12);
    assert_eq!(report.train_size, 84);
    for (k, which) in Estimator::ALL.iter().enumerate() {
        let mean = report.errors.iter().map(|e| e[k]).sum::<f64>() / 12.0;
        assert!((report.mean(*which) - mean).abs() < 1e-12);
    }
    // the refit on the selected set predicts better than the biased lasso fit
    assert!(report.mean(Estimator::Re) < report.mean(Estimator::Pls));
}

#[test]
fn bundle_partition_and_shapes() {
    let (data, _) = simulate_case(Case::Three, 100, 80, 1.0, 4).unwrap();
    let b = run_pipeline(&data, Method::Lasso, &TuningConfig::default()).unwrap();
    assert!(b.partition.is_disjoint() && b.partition.covers(80));
    for which in Estimator::ALL {
        let full: DVector<f64> = b.full(which);
        assert_eq!(full.len(), 80);
        if which != Estimator::Pls {
            // everything but the selector lives on S1 or on S1 and S2
            for j in b.partition.s3.iter() {
                assert_eq!(full[j], 0.0, "{which:?} at {j}");
            }
        }
    }
}
