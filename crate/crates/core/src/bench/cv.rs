use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::shrinkage::{run_pipeline_with, Estimator, PipelineConfig};

/// Held-out prediction error of one estimator across random splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorError {
    pub estimator: Estimator,
    pub mean_error: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPredictionReport {
    pub partitions: usize,
    pub train_size: usize,
    pub summary: Vec<EstimatorError>,
    /// `errors[k][e]`: mean squared test error of estimator `Estimator::ALL[e]`
    /// on split `k`.
    pub errors: Vec<[f64; 5]>,
}

impl CvPredictionReport {
    pub fn mean(&self, which: Estimator) -> f64 {
        self.summary
            .iter()
            .find(|e| e.estimator == which)
            .map(|e| e.mean_error)
            .expect("every estimator is summarized")
    }
}

/// Repeated random train/test splits: the pipeline is refit on each
/// training part and every estimator predicts the held-out rows.
pub fn cv_prediction_error(
    data: &Dataset,
    cfg: &PipelineConfig,
    partitions: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<CvPredictionReport> {
    if partitions == 0 {
        return Err(Error::InvalidArgument("need at least one partition".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.n();
    let train_size = (n as f64 * train_fraction).round() as usize;
    if train_size < 2 || train_size >= n {
        return Err(Error::InsufficientData(format!(
            "a {train_fraction} split of {n} rows leaves no usable training or test set"
        )));
    }

    let errors: Vec<[f64; 5]> = (0..partitions)
        .into_par_iter()
        .map(|k| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng::seeded(rng::derive_seed(seed, &[k as u64])));
            let (train_idx, test_idx) = idx.split_at(train_size);
            let mut train_idx = train_idx.to_vec();
            let mut test_idx = test_idx.to_vec();
            train_idx.sort_unstable();
            test_idx.sort_unstable();
            let train = data.subset_rows(&train_idx)?;
            let mut split_cfg = cfg.clone();
            split_cfg.tuning.seed = rng::derive_seed(seed, &[k as u64, 1]);
            let bundle = run_pipeline_with(&train, &split_cfg)?;
            let raw = data.raw_rows(&test_idx);
            let y = data.raw_response(&test_idx);
            let mut out = [0.0; 5];
            for (e, which) in Estimator::ALL.iter().enumerate() {
                let pred = train.predict_raw(&raw, &bundle.full(*which));
                out[e] = (&y - pred).norm_squared() / test_idx.len() as f64;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let m = errors.len() as f64;
    let summary = Estimator::ALL
        .iter()
        .enumerate()
        .map(|(e, &estimator)| {
            let mean = errors.iter().map(|r| r[e]).sum::<f64>() / m;
            let std_error = (errors.len() > 1).then(|| {
                let var = errors.iter().map(|r| (r[e] - mean).powi(2)).sum::<f64>() / (m - 1.0);
                (var / m).sqrt()
            });
            EstimatorError {
                estimator,
                mean_error: mean,
                std_error,
            }
        })
        .collect();
    Ok(CvPredictionReport {
        partitions,
        train_size,
        summary,
        errors,
    })
}
