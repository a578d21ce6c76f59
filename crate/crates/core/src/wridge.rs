//! Post-selection weighted ridge: a ridge penalty on the coefficients outside
//! the candidate subset `Ŝ₁` only, followed by hard thresholding at `a_n`.
//!
//! The minimizer of `‖y − Xβ‖² + r‖β_{Ŝ₁ᶜ}‖²` is computed blockwise,
//!
//! ```text
//! β̃_{Ŝ₁}  = (X₁'M₂X₁)⁻ X₁'M₂ y,        M₂ = I − X₂(rI + X₂'X₂)⁻¹X₂'
//! β̃_{Ŝ₁ᶜ} = (rI + X₂'M₁X₂)⁻¹ X₂'M₁ y,   M₁ = I − X₁(X₁'X₁)⁻X₁'
//! ```
//!
//! When `|Ŝ₁ᶜ| > n` both ridge systems are solved in their `n × n` dual
//! form, `(rI + A'A)⁻¹A' = A'(rI + AA')⁻¹` and `M₂ = r(rI + X₂X₂')⁻¹`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, SpanProjector};
use crate::rng;
use crate::selection::restricted_ls;
use crate::shrinkage::{shrink_stage, Sigma2Mode};
use crate::support::{SubsetPartition, Support};

/// Constants of the `a_n` and `r_n` schedules plus cross-validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            alpha: 0.125,
            c1: 1.0,
            c2: 1.0,
            cv_folds: 5,
            seed: 0,
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be in (0, 1/2], got {}",
                self.alpha
            )));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidArgument(format!("c1 must be positive, got {}", self.c1)));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::InvalidArgument(format!("c2 must be positive, got {}", self.c2)));
        }
        Ok(())
    }

    /// `(a_n, r_n)` for a sample of size `n` with `p` coefficients.
    pub fn schedules(&self, n: usize, p: usize) -> Result<(f64, f64)> {
        self.validate()?;
        let an = compute_an(n, self.c1, self.alpha)?;
        let rn = compute_rn(n, p, an, self.c2)?;
        Ok((an, rn))
    }
}

/// Threshold `a_n = c₁ n^(−α)`.
pub fn compute_an(n: usize, c1: f64, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::InvalidArgument(format!("c1 must be positive, got {c1}")));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1/2], got {alpha}")));
    }
    Ok(c1 * (n as f64).powf(-alpha))
}

/// Ridge penalty `r_n = c₂ a_n⁻² (ln ln n)³ ln(max(n, p))`.
pub fn compute_rn(n: usize, p: usize, an: f64, c2: f64) -> Result<f64> {
    if n < 16 {
        return Err(Error::InvalidArgument(format!(
            "r_n needs n >= 16 for a positive iterated logarithm, got {n}"
        )));
    }
    if !(an > 0.0 && an.is_finite()) {
        return Err(Error::InvalidArgument(format!("a_n must be positive, got {an}")));
    }
    if !(c2 > 0.0 && c2.is_finite()) {
        return Err(Error::InvalidArgument(format!("c2 must be positive, got {c2}")));
    }
    let nf = n as f64;
    let loglog = nf.ln().ln();
    Ok(c2 * loglog.powi(3) * (n.max(p) as f64).ln() / (an * an))
}

/// Unthresholded solution of the partially penalized ridge problem.
#[derive(Debug, Clone, PartialEq)]
pub struct WrSolution {
    pub beta_tilde: DVector<f64>,
    /// Set when the problem degenerates (for example `Ŝ₁ᶜ` empty).
    pub diagnostic: Option<String>,
}

enum Ridge {
    /// Nothing outside `Ŝ₁`.
    Empty,
    /// `|Ŝ₁ᶜ| ≤ n`: `X₂'X₂` and `X₂'M₁X₂`.
    Primal { x2tx2: DMatrix<f64>, a_ta: DMatrix<f64>, a_ty: DVector<f64> },
    /// `|Ŝ₁ᶜ| > n`: `X₂X₂'` and `M₁X₂X₂'M₁`.
    Dual { g2: DMatrix<f64>, aat: DMatrix<f64>, a: DMatrix<f64> },
}

/// Precomputed pieces of the blockwise solve for one `(data, Ŝ₁)` pair;
/// [`WrSolver::solve`] is then cheap for each `r_n`.
pub struct WrSolver<'a> {
    data: &'a Dataset,
    s1: Support,
    s1c: Support,
    x1: DMatrix<f64>,
    x2: DMatrix<f64>,
    ridge: Ridge,
}

impl<'a> WrSolver<'a> {
    pub fn new(data: &'a Dataset, s1: &Support) -> Result<Self> {
        s1.check_within(data.p(), "Ŝ₁")?;
        let s1c = s1.complement(data.p());
        let x1 = linalg::columns(data.x(), s1);
        let x2 = linalg::columns(data.x(), &s1c);
        let proj = SpanProjector::new(&x1);
        let n = data.n();
        let ridge = if s1c.is_empty() {
            Ridge::Empty
        } else if s1c.len() <= n {
            let a = proj.residual_matrix(&x2);
            Ridge::Primal {
                x2tx2: x2.tr_mul(&x2),
                a_ta: linalg::symmetrize(&a.tr_mul(&a)),
                a_ty: a.tr_mul(data.y()),
            }
        } else {
            let g2 = &x2 * x2.transpose();
            let m1g2 = proj.residual_matrix(&g2);
            let aat = linalg::symmetrize(&proj.residual_matrix(&m1g2.transpose()));
            let a = proj.residual_matrix(&x2);
            Ridge::Dual { g2, aat, a }
        };
        Ok(WrSolver {
            data,
            s1: s1.clone(),
            s1c,
            x1,
            x2,
            ridge,
        })
    }

    /// `M₂ V` for the current ridge penalty.
    fn apply_m2(&self, r: f64, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.ridge {
            Ridge::Empty => Ok(v.clone()),
            Ridge::Primal { x2tx2, .. } => {
                let chol = linalg::cholesky(shift(x2tx2, r), "rI + X₂'X₂")?;
                Ok(v - &self.x2 * chol.solve(&self.x2.tr_mul(v)))
            }
            Ridge::Dual { g2, .. } => {
                let chol = linalg::cholesky(shift(g2, r), "rI + X₂X₂'")?;
                Ok(chol.solve(v) * r)
            }
        }
    }

    pub fn solve(&self, r_n: f64) -> Result<WrSolution> {
        if !(r_n > 0.0 && r_n.is_finite()) {
            return Err(Error::InvalidArgument(format!("r_n must be positive, got {r_n}")));
        }
        let p = self.data.p();
        if self.s1c.is_empty() {
            let re = restricted_ls(self.data, &self.s1)?;
            return Ok(WrSolution {
                beta_tilde: linalg::embed(p, &self.s1, &re),
                diagnostic: Some("Ŝ₁ covers every coefficient; returning the restricted estimator".into()),
            });
        }
        let beta2 = match &self.ridge {
            Ridge::Primal { a_ta, a_ty, .. } => {
                linalg::cholesky(shift(a_ta, r_n), "rI + X₂'M₁X₂")?.solve(a_ty)
            }
            Ridge::Dual { aat, a, .. } => {
                let chol = linalg::cholesky(shift(aat, r_n), "rI + M₁X₂X₂'M₁")?;
                a.tr_mul(&chol.solve(self.data.y()))
            }
            Ridge::Empty => unreachable!(),
        };
        let mut beta = linalg::embed(p, &self.s1c, &beta2);
        if !self.s1.is_empty() {
            let m2x1 = self.apply_m2(r_n, &self.x1)?;
            let k = linalg::symmetrize(&self.x1.tr_mul(&m2x1));
            // X₁'M₂y = (M₂X₁)'y since M₂ is symmetric
            let rhs = m2x1.tr_mul(self.data.y());
            let beta1 = linalg::ginv_solve(&k, &rhs);
            for (k, j) in self.s1.iter().enumerate() {
                beta[j] = beta1[k];
            }
        }
        Ok(WrSolution {
            beta_tilde: beta,
            diagnostic: None,
        })
    }
}

fn shift(a: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
    let mut out = a.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += r;
    }
    out
}

/// `β̃(r_n)` for the subset `s1`.
pub fn wr_solve(data: &Dataset, s1: &Support, r_n: f64) -> Result<WrSolution> {
    WrSolver::new(data, s1)?.solve(r_n)
}

/// `‖y − Xβ‖² + r‖β_{Ŝ₁ᶜ}‖²`.
pub fn wr_objective(data: &Dataset, s1: &Support, r_n: f64, beta: &DVector<f64>) -> f64 {
    let resid = data.y() - data.x() * beta;
    let pen: f64 = (0..beta.len())
        .filter(|&j| !s1.contains(j))
        .map(|j| beta[j] * beta[j])
        .sum();
    resid.norm_squared() + r_n * pen
}

/// Gradient of [`wr_objective`].
pub fn wr_gradient(data: &Dataset, s1: &Support, r_n: f64, beta: &DVector<f64>) -> DVector<f64> {
    let resid = data.y() - data.x() * beta;
    let mut g = data.x().tr_mul(&resid) * -2.0;
    for j in 0..beta.len() {
        if !s1.contains(j) {
            g[j] += 2.0 * r_n * beta[j];
        }
    }
    g
}

/// Thresholded weighted ridge fit and the partition it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct WrFit {
    pub beta_tilde: DVector<f64>,
    pub beta_wr: DVector<f64>,
    pub partition: SubsetPartition,
    /// Ridge penalty behind `beta_tilde`, when known.
    pub r_n: Option<f64>,
    pub a_n: f64,
}

impl WrFit {
    /// `ŝ₂ = |Ŝ₂|`.
    pub fn s2_count(&self) -> usize {
        self.partition.s2.len()
    }

    /// True when `ŝ₂ > 2` and `|Ŝ₃ᶜ| < n`, the conditions under which the
    /// shrinkage step is defined.
    pub fn guard_ok(&self, n: usize) -> bool {
        self.s2_count() > 2 && self.partition.s1.len() + self.s2_count() < n
    }
}

/// Keeps `β̃` on `Ŝ₁` and zeroes entries outside `Ŝ₁` with `|β̃ⱼ| ≤ a_n`.
///
/// `a_n = +∞` zeroes the whole complement.
pub fn threshold_wr(beta_tilde: &DVector<f64>, s1: &Support, a_n: f64) -> Result<WrFit> {
    if a_n.is_nan() || a_n < 0.0 {
        return Err(Error::InvalidArgument(format!("a_n must be nonnegative, got {a_n}")));
    }
    let p = beta_tilde.len();
    s1.check_within(p, "Ŝ₁")?;
    let mut beta_wr = beta_tilde.clone();
    let mut s2 = Vec::new();
    let mut s3 = Vec::new();
    for j in 0..p {
        if s1.contains(j) {
            continue;
        }
        if beta_tilde[j].abs() > a_n {
            s2.push(j);
        } else {
            beta_wr[j] = 0.0;
            s3.push(j);
        }
    }
    Ok(WrFit {
        beta_tilde: beta_tilde.clone(),
        beta_wr,
        partition: SubsetPartition {
            s1: s1.clone(),
            s2: Support::new(s2),
            s3: Support::new(s3),
        },
        r_n: None,
        a_n,
    })
}

/// Solve and threshold in one step.
pub fn fit_wr(data: &Dataset, s1: &Support, r_n: f64, a_n: f64) -> Result<WrFit> {
    let sol = wr_solve(data, s1, r_n)?;
    let mut fit = threshold_wr(&sol.beta_tilde, s1, a_n)?;
    fit.r_n = Some(r_n);
    Ok(fit)
}

/// Candidate grids for [`cv_tune`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

impl Default for CvGrid {
    fn default() -> Self {
        CvGrid {
            c1: vec![0.5, 1.0, 2.0],
            c2: vec![0.01, 0.1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCandidate {
    pub c1: f64,
    pub c2: f64,
    /// `r_n` at the full sample size, used to break ties.
    pub r_n: f64,
    /// Mean held-out squared prediction error of the PSE fit.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub tuning: TuningConfig,
    pub candidates: Vec<CvCandidate>,
}

/// Random partition of `0..n` into `k` folds of near-equal size.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// Chooses `(c₁, c₂)` by K-fold cross-validation of the PSE prediction
/// `ŷ = X_{Ŝ₁} β̂^PSE` (RE when the shrinkage guard fails).
///
/// Each training fold is re-centered and its schedules use the training
/// sample size. Ties are broken toward the smaller full-sample `r_n`.
pub fn cv_tune(data: &Dataset, s1: &Support, grid: &CvGrid, base: &TuningConfig) -> Result<CvOutcome> {
    if base.cv_folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {}",
            base.cv_folds
        )));
    }
    if base.cv_folds > data.n() {
        return Err(Error::InvalidArgument(format!(
            "{} folds for {} observations",
            base.cv_folds,
            data.n()
        )));
    }
    if grid.c1.is_empty() || grid.c2.is_empty() {
        return Err(Error::InvalidArgument("empty tuning grid".into()));
    }
    if s1.is_empty() {
        return Err(Error::EmptySupport("cross-validation needs a nonempty Ŝ₁".into()));
    }
    let pairs: Vec<(f64, f64)> = grid
        .c1
        .iter()
        .flat_map(|&c1| grid.c2.iter().map(move |&c2| (c1, c2)))
        .collect();
    for &(c1, c2) in &pairs {
        TuningConfig { c1, c2, ..base.clone() }.validate()?;
    }

    let p = data.p();
    let folds = fold_assignment(data.n(), base.cv_folds, base.seed);
    let mut sse = vec![0.0; pairs.len()];
    for test in &folds {
        let train_rows: Vec<usize> = (0..data.n()).filter(|i| test.binary_search(i).is_err()).collect();
        let train = data.subset_rows(&train_rows)?;
        let re = restricted_ls(&train, s1)?;
        let solver = WrSolver::new(&train, s1)?;
        let raw_test = data.raw_rows(test);
        let y_test = data.raw_response(test);
        for (k, &(c1, c2)) in pairs.iter().enumerate() {
            let an = compute_an(train.n(), c1, base.alpha)?;
            let rn = compute_rn(train.n(), p, an, c2)?;
            let sol = solver.solve(rn)?;
            let mut wr = threshold_wr(&sol.beta_tilde, s1, an)?;
            wr.r_n = Some(rn);
            let stage = shrink_stage(&train, &wr, &re, Sigma2Mode::WeakOnly)?;
            let beta = linalg::embed(p, s1, &stage.pse);
            let pred = train.predict_raw(&raw_test, &beta);
            sse[k] += (&y_test - pred).norm_squared();
        }
    }

    let n = data.n();
    let mut candidates = Vec::with_capacity(pairs.len());
    for (k, &(c1, c2)) in pairs.iter().enumerate() {
        let an = compute_an(n, c1, base.alpha)?;
        candidates.push(CvCandidate {
            c1,
            c2,
            r_n: compute_rn(n, p, an, c2)?,
            score: sse[k] / n as f64,
        });
    }
    let best = candidates
        .iter()
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.r_n.total_cmp(&b.r_n))
                .then(a.c1.total_cmp(&b.c1))
                .then(a.c2.total_cmp(&b.c2))
        })
        .expect("nonempty grid");
    Ok(CvOutcome {
        tuning: TuningConfig {
            c1: best.c1,
            c2: best.c2,
            ..base.clone()
        },
        candidates,
    })
}
