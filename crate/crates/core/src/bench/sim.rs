use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{simulate_case, Case};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::selection::Method;
use crate::shrinkage::{run_pipeline_with, Estimator, PipelineConfig};
use crate::wridge::CvGrid;

use super::{ratio_of_means, RatioEstimate};

/// Share of failed replications a cell may absorb before it is reported as
/// an error.
const FAILURE_BUDGET: f64 = 0.05;

/// One simulation study: a case layout run over a grid of dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub case: Case,
    pub n: usize,
    pub p_grid: Vec<usize>,
    pub replications: usize,
    pub pipeline: PipelineConfig,
    pub sigma: f64,
    pub base_seed: u64,
}

impl SimConfig {
    /// Defaults: σ = 1, `(c₁, c₂)` chosen per replication by cross-validation.
    pub fn new(case: Case, n: usize, p_grid: Vec<usize>, replications: usize, method: Method) -> Self {
        let mut pipeline = PipelineConfig::new(method, Default::default());
        pipeline.cv_grid = Some(CvGrid::default());
        SimConfig {
            case,
            n,
            p_grid,
            replications,
            pipeline,
            sigma: 1.0,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        if self.p_grid.is_empty() {
            return Err(Error::InvalidArgument("empty p grid".into()));
        }
        if let Some(&p) = self.p_grid.iter().find(|&&p| p < self.case.min_p()) {
            return Err(Error::InvalidArgument(format!(
                "p = {p} is below the minimum {} for case {}",
                self.case.min_p(),
                self.case.id()
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("σ must be positive, got {}", self.sigma)));
        }
        self.pipeline.tuning.validate()
    }
}

/// `round(n^τ)` for each exponent.
pub fn p_grid_from_tau(n: usize, taus: &[f64]) -> Vec<usize> {
    taus.iter().map(|&t| (n as f64).powf(t).round() as usize).collect()
}

/// Summary of one `(case, p)` cell. RMSE columns compare each estimator
/// against WR on the true strong coordinates; standard errors are absent
/// when the cell has a single replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub case: u8,
    pub n: usize,
    pub p: usize,
    pub replications: usize,
    pub failures: usize,
    pub single_draw: bool,
    pub df: f64,
    pub df_se: Option<f64>,
    pub rmse_pls: f64,
    pub rmse_pls_se: Option<f64>,
    pub rmse_re: f64,
    pub rmse_re_se: Option<f64>,
    pub rmse_se: f64,
    pub rmse_se_se: Option<f64>,
    pub rmse_pse: f64,
    pub rmse_pse_se: Option<f64>,
    pub guard_rate: f64,
    pub mean_s2_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
}

impl RiskReport {
    pub fn row(&self, p: usize) -> Option<&RiskRow> {
        self.rows.iter().find(|r| r.p == p)
    }
}

struct RepOutcome {
    df: f64,
    /// Squared error on the true strong coordinates, indexed like `Estimator::ALL`.
    sq_err: [f64; 5],
    guard: bool,
    s2_hat: f64,
}

fn run_replication(cfg: &SimConfig, p: usize, rep: usize) -> Result<RepOutcome> {
    let seed = rng::derive_seed(cfg.base_seed, &[cfg.case.id() as u64, p as u64, rep as u64]);
    let (data, truth) = simulate_case(cfg.case, cfg.n, p, cfg.sigma, seed)?;
    let mut pipeline = cfg.pipeline.clone();
    pipeline.tuning.seed = rng::derive_seed(seed, &[1]);
    let bundle = run_pipeline_with(&data, &pipeline)?;
    let s1 = &truth.partition.s1;
    let star = linalg::gather(&truth.beta_star, s1);
    let mut sq_err = [0.0; 5];
    for (k, which) in Estimator::ALL.iter().enumerate() {
        sq_err[k] = (bundle.on(*which, s1) - &star).norm_squared();
    }
    Ok(RepOutcome {
        df: bundle.partition.s1.len() as f64,
        sq_err,
        guard: bundle.guard_triggered,
        s2_hat: bundle.s2_hat_count() as f64,
    })
}

fn mean_se(xs: &[f64]) -> (f64, Option<f64>) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let se = (xs.len() > 1).then(|| {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    });
    (mean, se)
}

fn run_cell(cfg: &SimConfig, p: usize) -> Result<RiskRow> {
    let results: Vec<Result<RepOutcome>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, p, rep))
        .collect();
    let failures = results.iter().filter(|r| r.is_err()).count();
    let budget = (FAILURE_BUDGET * cfg.replications as f64).floor() as usize;
    if failures > budget {
        let first = results.into_iter().find_map(|r| r.err()).expect("a failure exists");
        return Err(Error::InsufficientData(format!(
            "{failures} of {} replications failed at p = {p} (budget {budget}); first error: {first}",
            cfg.replications
        )));
    }
    let ok: Vec<RepOutcome> = results.into_iter().filter_map(|r| r.ok()).collect();
    let col = |k: usize| ok.iter().map(|o| o.sq_err[k]).collect::<Vec<_>>();
    let wr = col(2);
    let rel = |k: usize| -> Result<RatioEstimate> { ratio_of_means(&wr, &col(k)) };
    let (df, df_se) = mean_se(&ok.iter().map(|o| o.df).collect::<Vec<_>>());
    let pls = rel(0)?;
    let re = rel(1)?;
    let se = rel(3)?;
    let pse = rel(4)?;
    let m = ok.len() as f64;
    Ok(RiskRow {
        case: cfg.case.id(),
        n: cfg.n,
        p,
        replications: ok.len(),
        failures,
        single_draw: ok.len() == 1,
        df,
        df_se,
        rmse_pls: pls.value,
        rmse_pls_se: pls.std_error,
        rmse_re: re.value,
        rmse_re_se: re.std_error,
        rmse_se: se.value,
        rmse_se_se: se.std_error,
        rmse_pse: pse.value,
        rmse_pse_se: pse.std_error,
        guard_rate: ok.iter().filter(|o| o.guard).count() as f64 / m,
        mean_s2_hat: ok.iter().map(|o| o.s2_hat).sum::<f64>() / m,
    })
}

/// Runs every cell of the study. Each replication draws its data from a
/// seed derived from `(base_seed, case, p, replication)`, so rows do not
/// depend on the order of `p_grid`.
pub fn run_table(config: &SimConfig) -> Result<RiskReport> {
    config.validate()?;
    let rows = config
        .p_grid
        .iter()
        .map(|&p| run_cell(config, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskReport { rows })
}

pub fn write_report(report: &RiskReport, path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RiskReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut r = csv::Reader::from_reader(file);
    let rows = r.deserialize().collect::<std::result::Result<Vec<RiskRow>, _>>()?;
    Ok(RiskReport { rows })
}
