//! Stein-type shrinkage of the weighted ridge fit on `Ŝ₁` toward the
//! restricted estimator, and the three-step pipeline that produces every
//! estimator in one pass.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, SpanProjector};
use crate::selection::{restricted_ls, select, Method, Selection, SelectionConfig};
use crate::support::{SubsetPartition, Support};
use crate::wridge::{cv_tune, CvGrid, TuningConfig, WrFit, WrSolver, threshold_wr};

/// Which fitted values enter the residual variance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Sigma2Mode {
    /// `‖y − X_{Ŝ₂}β̂_{Ŝ₂}‖² / (n − ŝ₂)`.
    #[default]
    WeakOnly,
    /// `‖y − X_{Ŝ₁∪Ŝ₂}β̂_{Ŝ₁∪Ŝ₂}‖² / (n − |Ŝ₁| − ŝ₂)`.
    StrongAndWeak,
}

/// Residual variance estimate with the default [`Sigma2Mode::WeakOnly`] fit.
pub fn sigma2_hat(data: &Dataset, wr: &WrFit) -> Result<f64> {
    sigma2_hat_with(data, wr, Sigma2Mode::WeakOnly)
}

pub fn sigma2_hat_with(data: &Dataset, wr: &WrFit, mode: Sigma2Mode) -> Result<f64> {
    check_fit(data, wr)?;
    let fitted_on = match mode {
        Sigma2Mode::WeakOnly => wr.partition.s2.clone(),
        Sigma2Mode::StrongAndWeak => wr.partition.non_sparse(),
    };
    let n = data.n();
    if n <= fitted_on.len() {
        return Err(Error::InsufficientData(format!(
            "σ̂² needs n > {} fitted coefficients, got n = {n}",
            fitted_on.len()
        )));
    }
    let beta = linalg::gather(&wr.beta_wr, &fitted_on);
    let resid = data.y() - linalg::columns(data.x(), &fitted_on) * beta;
    Ok(resid.norm_squared() / (n - fitted_on.len()) as f64)
}

fn check_fit(data: &Dataset, wr: &WrFit) -> Result<()> {
    if wr.beta_wr.len() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "WR fit has {} coefficients, data has {}",
            wr.beta_wr.len(),
            data.p()
        )));
    }
    Ok(())
}

/// `Tₙ = ‖M_{Ŝ₁} X_{Ŝ₂} β̂_{Ŝ₂}‖² / σ²`.
pub fn compute_tn(data: &Dataset, wr: &WrFit, sigma2: f64) -> Result<f64> {
    check_fit(data, wr)?;
    if wr.partition.s2.is_empty() {
        return Err(Error::EmptySupport("Tₙ is undefined for an empty Ŝ₂".into()));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!("σ² must be positive, got {sigma2}")));
    }
    let proj = SpanProjector::new(&linalg::columns(data.x(), &wr.partition.s1));
    let fit2 = linalg::columns(data.x(), &wr.partition.s2) * linalg::gather(&wr.beta_wr, &wr.partition.s2);
    Ok(proj.residual(&fit2).norm_squared() / sigma2)
}

/// `(ŝ₂ − 2) / Tₙ`.
pub fn shrink_factor(s2_count: usize, t_n: f64) -> Result<f64> {
    if !(t_n > 0.0) || !t_n.is_finite() {
        return Err(Error::ZeroDenominator("Tₙ must be positive and finite"));
    }
    Ok((s2_count as f64 - 2.0) / t_n)
}

fn combine(beta_wr_s1: &DVector<f64>, beta_re: &DVector<f64>, factor: f64) -> Result<DVector<f64>> {
    if beta_wr_s1.len() != beta_re.len() {
        return Err(Error::DimensionMismatch(format!(
            "WR on Ŝ₁ has {} entries, RE has {}",
            beta_wr_s1.len(),
            beta_re.len()
        )));
    }
    Ok(beta_wr_s1 - (beta_wr_s1 - beta_re) * factor)
}

/// `β̂^SE = β̂^WR_{Ŝ₁} − ((ŝ₂ − 2)/Tₙ)(β̂^WR_{Ŝ₁} − β̂^RE)`.
pub fn shrink_se(beta_wr_s1: &DVector<f64>, beta_re: &DVector<f64>, s2_count: usize, t_n: f64) -> Result<DVector<f64>> {
    combine(beta_wr_s1, beta_re, shrink_factor(s2_count, t_n)?)
}

/// Positive-part version of [`shrink_se`]: the factor is capped at one.
pub fn shrink_pse(beta_wr_s1: &DVector<f64>, beta_re: &DVector<f64>, s2_count: usize, t_n: f64) -> Result<DVector<f64>> {
    let factor = shrink_factor(s2_count, t_n)?;
    if factor >= 1.0 {
        return Ok(beta_re.clone());
    }
    combine(beta_wr_s1, beta_re, factor)
}

/// Step-3 output for a fixed WR fit and RE.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkStage {
    pub sigma2_hat: Option<f64>,
    pub t_n: Option<f64>,
    pub shrink_factor: Option<f64>,
    pub se: DVector<f64>,
    pub pse: DVector<f64>,
    pub guard_triggered: bool,
    pub diagnostic: Option<String>,
}

/// Computes σ̂², Tₙ, SE and PSE, or falls back to `SE = PSE = RE` when
/// `ŝ₂ ≤ 2`, `|Ŝ₃ᶜ| ≥ n`, or the statistic degenerates.
pub fn shrink_stage(data: &Dataset, wr: &WrFit, beta_re: &DVector<f64>, mode: Sigma2Mode) -> Result<ShrinkStage> {
    check_fit(data, wr)?;
    let s1 = &wr.partition.s1;
    if beta_re.len() != s1.len() {
        return Err(Error::DimensionMismatch(format!(
            "RE has {} entries for |Ŝ₁| = {}",
            beta_re.len(),
            s1.len()
        )));
    }
    let fallback = |sigma2: Option<f64>, t_n: Option<f64>, why: String| ShrinkStage {
        sigma2_hat: sigma2,
        t_n,
        shrink_factor: None,
        se: beta_re.clone(),
        pse: beta_re.clone(),
        guard_triggered: true,
        diagnostic: Some(why),
    };
    let n = data.n();
    if !wr.guard_ok(n) {
        return Ok(fallback(
            None,
            None,
            format!(
                "shrinkage skipped: ŝ₂ = {}, |Ŝ₃ᶜ| = {}, n = {n}",
                wr.s2_count(),
                s1.len() + wr.s2_count()
            ),
        ));
    }
    let sigma2 = sigma2_hat_with(data, wr, mode)?;
    if !(sigma2 > 0.0) {
        return Ok(fallback(Some(sigma2), None, "shrinkage skipped: σ̂² = 0".into()));
    }
    let t_n = compute_tn(data, wr, sigma2)?;
    if !(t_n > 0.0) {
        return Ok(fallback(Some(sigma2), Some(t_n), "shrinkage skipped: Tₙ = 0".into()));
    }
    let wr_s1 = linalg::gather(&wr.beta_wr, s1);
    let factor = shrink_factor(wr.s2_count(), t_n)?;
    Ok(ShrinkStage {
        sigma2_hat: Some(sigma2),
        t_n: Some(t_n),
        shrink_factor: Some(factor),
        se: shrink_se(&wr_s1, beta_re, wr.s2_count(), t_n)?,
        pse: shrink_pse(&wr_s1, beta_re, wr.s2_count(), t_n)?,
        guard_triggered: false,
        diagnostic: None,
    })
}

/// Labels for the five estimators the pipeline produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    Pls,
    Re,
    Wr,
    Se,
    Pse,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [Estimator::Pls, Estimator::Re, Estimator::Wr, Estimator::Se, Estimator::Pse];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Pls => "pls",
            Estimator::Re => "re",
            Estimator::Wr => "wr",
            Estimator::Se => "se",
            Estimator::Pse => "pse",
        }
    }
}

/// Every estimator from one run of the pipeline plus its diagnostics.
///
/// `beta_re`, `beta_se` and `beta_pse` are indexed by `partition.s1`; the
/// other vectors have length `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorBundle {
    pub method: Method,
    pub lambda: f64,
    pub beta_pls: DVector<f64>,
    pub beta_re: DVector<f64>,
    pub beta_wr: DVector<f64>,
    pub beta_tilde: DVector<f64>,
    pub beta_se: DVector<f64>,
    pub beta_pse: DVector<f64>,
    pub partition: SubsetPartition,
    pub tuning: TuningConfig,
    pub a_n: f64,
    pub r_n: f64,
    pub t_n: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub shrink_factor: Option<f64>,
    pub guard_triggered: bool,
    pub diagnostics: Vec<String>,
}

impl EstimatorBundle {
    pub fn s2_hat_count(&self) -> usize {
        self.partition.s2.len()
    }

    /// Coefficients of one estimator as a length-`p` vector.
    pub fn full(&self, which: Estimator) -> DVector<f64> {
        let p = self.beta_pls.len();
        let s1 = &self.partition.s1;
        match which {
            Estimator::Pls => self.beta_pls.clone(),
            Estimator::Wr => self.beta_wr.clone(),
            Estimator::Re => linalg::embed(p, s1, &self.beta_re),
            Estimator::Se => linalg::embed(p, s1, &self.beta_se),
            Estimator::Pse => linalg::embed(p, s1, &self.beta_pse),
        }
    }

    /// Coefficients of one estimator restricted to `s`, zero where the
    /// estimator has no entry.
    pub fn on(&self, which: Estimator, s: &Support) -> DVector<f64> {
        linalg::gather(&self.full(which), s)
    }
}

/// Settings for the full three-step pipeline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub selection: SelectionConfig,
    pub tuning: TuningConfig,
    pub sigma2_mode: Sigma2Mode,
    /// When set, `(c₁, c₂)` are chosen by cross-validation over this grid
    /// instead of taken from `tuning`.
    pub cv_grid: Option<CvGrid>,
}

impl PipelineConfig {
    pub fn new(method: Method, tuning: TuningConfig) -> Self {
        PipelineConfig {
            selection: SelectionConfig::with_method(method),
            tuning,
            ..Default::default()
        }
    }
}

/// Steps 2 and 3 for an existing step-1 result.
pub fn run_from_selection(data: &Dataset, sel: &Selection, cfg: &PipelineConfig) -> Result<EstimatorBundle> {
    let s1 = &sel.s1;
    if s1.is_empty() {
        return Err(Error::EmptySupport(
            "the selected model is empty; use a smaller λ (lower lambda inflation or a longer path)".into(),
        ));
    }
    let mut diagnostics = Vec::new();
    let tuning = match &cfg.cv_grid {
        Some(grid) => cv_tune(data, s1, grid, &cfg.tuning)?.tuning,
        None => cfg.tuning.clone(),
    };
    let (a_n, r_n) = tuning.schedules(data.n(), data.p())?;
    let beta_re = restricted_ls(data, s1)?;
    let sol = WrSolver::new(data, s1)?.solve(r_n)?;
    diagnostics.extend(sol.diagnostic);
    let mut wr = threshold_wr(&sol.beta_tilde, s1, a_n)?;
    wr.r_n = Some(r_n);
    let stage = shrink_stage(data, &wr, &beta_re, cfg.sigma2_mode)?;
    diagnostics.extend(stage.diagnostic);
    Ok(EstimatorBundle {
        method: sel.method,
        lambda: sel.lambda,
        beta_pls: sel.beta_pls.clone(),
        beta_re,
        beta_wr: wr.beta_wr,
        beta_tilde: wr.beta_tilde,
        beta_se: stage.se,
        beta_pse: stage.pse,
        partition: wr.partition,
        tuning,
        a_n,
        r_n,
        t_n: stage.t_n,
        sigma2_hat: stage.sigma2_hat,
        shrink_factor: stage.shrink_factor,
        guard_triggered: stage.guard_triggered,
        diagnostics,
    })
}

/// Runs selection, weighted ridge and shrinkage with fixed tuning constants.
pub fn run_pipeline(data: &Dataset, method: Method, tuning: &TuningConfig) -> Result<EstimatorBundle> {
    run_pipeline_with(data, &PipelineConfig::new(method, tuning.clone()))
}

pub fn run_pipeline_with(data: &Dataset, cfg: &PipelineConfig) -> Result<EstimatorBundle> {
    cfg.tuning.validate()?;
    let sel = select(data, &cfg.selection)?;
    run_from_selection(data, &sel, cfg)
}
