//! Candidate-subset selection: Lasso and Adaptive Lasso by cyclic coordinate
//! descent, BIC choice along a warm-started path, and the restricted
//! least-squares refit.
//!
//! The penalized objective is the unscaled one,
//!
//! ```text
//! Σᵢ (yᵢ − xᵢ'β)² + λ Σⱼ fⱼ |βⱼ|
//! ```
//!
//! with per-coefficient penalty factors `fⱼ` (all one for the Lasso). The
//! exact coordinate update is `βⱼ ← S(xⱼ'rⱼ, λfⱼ/2) / ‖xⱼ‖²`, so on an
//! orthonormal design (`X'X = nI`) the solution soft-thresholds `X'y/n` at
//! `λ/(2n)`, and `λ ≥ 2 maxⱼ |xⱼ'y|` gives the zero vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::support::Support;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Lasso,
    AdaptiveLasso,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(Method::Lasso),
            "alasso" | "adaptive" | "adaptive-lasso" | "adaptive_lasso" => Ok(Method::AdaptiveLasso),
            other => Err(Error::InvalidArgument(format!(
                "unknown method '{other}' (expected lasso or alasso)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Lasso => "lasso",
            Method::AdaptiveLasso => "alasso",
        })
    }
}

/// Output of a single coordinate-descent solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CdFit {
    pub beta: DVector<f64>,
    /// Number of coordinate sweeps performed.
    pub n_iter: usize,
    pub converged: bool,
}

/// Cyclic coordinate descent for the weighted-L1 least-squares objective.
///
/// A factor of `+∞` removes the coefficient from the model (it stays at 0).
#[derive(Debug, Clone)]
pub struct CoordinateDescent<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    col_sq: Vec<f64>,
    factors: Vec<f64>,
}

/// Mutable iterate: coefficients and the matching residual `y − Xβ`.
#[derive(Debug, Clone)]
pub struct CdState {
    pub beta: DVector<f64>,
    pub residual: DVector<f64>,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(data: &'a Dataset, factors: Vec<f64>) -> Result<Self> {
        if factors.len() != data.p() {
            return Err(Error::DimensionMismatch(format!(
                "{} penalty factors for {} coefficients",
                factors.len(),
                data.p()
            )));
        }
        if factors.iter().any(|f| f.is_nan() || *f < 0.0) {
            return Err(Error::InvalidArgument("penalty factors must be nonnegative".into()));
        }
        let x = data.x();
        let col_sq = x.column_iter().map(|c| c.norm_squared()).collect();
        Ok(CoordinateDescent {
            x,
            y: data.y(),
            col_sq,
            factors,
        })
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn zero_state(&self) -> CdState {
        CdState {
            beta: DVector::zeros(self.x.ncols()),
            residual: self.y.clone(),
        }
    }

    pub fn state_from(&self, beta: DVector<f64>) -> CdState {
        let residual = self.y - self.x * &beta;
        CdState { beta, residual }
    }

    /// Smallest `λ` at which the zero vector is optimal.
    pub fn lambda_max(&self) -> f64 {
        let xty = self.x.tr_mul(self.y);
        (0..self.x.ncols())
            .filter(|&j| self.factors[j].is_finite() && self.factors[j] > 0.0)
            .map(|j| 2.0 * xty[j].abs() / self.factors[j])
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, beta: &DVector<f64>, lambda: f64) -> f64 {
        let r = self.y - self.x * beta;
        let pen: f64 = beta
            .iter()
            .zip(&self.factors)
            .filter(|(b, _)| **b != 0.0)
            .map(|(b, f)| f * b.abs())
            .sum();
        r.norm_squared() + lambda * pen
    }

    fn update(&self, j: usize, lambda: f64, state: &mut CdState) -> f64 {
        let cj = self.col_sq[j];
        let fj = self.factors[j];
        if cj == 0.0 || fj.is_infinite() {
            return 0.0;
        }
        let col = self.x.column(j);
        let old = state.beta[j];
        let g = col.dot(&state.residual) + cj * old;
        let new = soft_threshold(g, 0.5 * lambda * fj) / cj;
        let delta = new - old;
        if delta != 0.0 {
            state.residual.axpy(-delta, &col, 1.0);
            state.beta[j] = new;
        }
        delta.abs()
    }

    /// One pass over every coordinate; returns the largest coefficient change.
    pub fn sweep(&self, lambda: f64, state: &mut CdState) -> f64 {
        (0..self.x.ncols()).fold(0.0, |m, j| m.max(self.update(j, lambda, state)))
    }

    fn sweep_active(&self, lambda: f64, state: &mut CdState) -> f64 {
        let active: Vec<usize> = (0..self.x.ncols()).filter(|&j| state.beta[j] != 0.0).collect();
        active
            .into_iter()
            .fold(0.0, |m, j| m.max(self.update(j, lambda, state)))
    }

    /// Runs sweeps until a full pass changes no coefficient by `tol` or more.
    ///
    /// Between full passes the solver cycles over the current nonzero set
    /// until it settles; every pass counts toward `max_iter`.
    pub fn solve(&self, lambda: f64, state: &mut CdState, tol: f64, max_iter: usize) -> (usize, bool) {
        let mut iters = 0;
        while iters < max_iter {
            let change = self.sweep(lambda, state);
            iters += 1;
            if change < tol {
                return (iters, true);
            }
            while iters < max_iter {
                let change = self.sweep_active(lambda, state);
                iters += 1;
                if change < tol {
                    break;
                }
            }
        }
        (iters, false)
    }

    /// Largest violation of the optimality conditions at `beta`:
    /// `|xⱼ'r| ≤ λfⱼ/2` for zero coefficients and `xⱼ'r = sign(βⱼ)λfⱼ/2`
    /// for nonzero ones.
    pub fn kkt_violation(&self, beta: &DVector<f64>, lambda: f64) -> f64 {
        let r = self.y - self.x * beta;
        let grad = self.x.tr_mul(&r);
        (0..beta.len())
            .filter(|&j| self.factors[j].is_finite())
            .map(|j| {
                let half = 0.5 * lambda * self.factors[j];
                if beta[j] == 0.0 {
                    (grad[j].abs() - half).max(0.0)
                } else {
                    (grad[j] - beta[j].signum() * half).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

fn check_solver_args(lambda: f64, tol: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    Ok(())
}

/// Lasso solution at a single `λ`, started from zero.
pub fn lasso_fit(data: &Dataset, lambda: f64, tol: f64, max_iter: usize) -> Result<CdFit> {
    weighted_lasso_fit(data, vec![1.0; data.p()], lambda, tol, max_iter)
}

fn weighted_lasso_fit(data: &Dataset, factors: Vec<f64>, lambda: f64, tol: f64, max_iter: usize) -> Result<CdFit> {
    check_solver_args(lambda, tol)?;
    let cd = CoordinateDescent::new(data, factors)?;
    let mut state = cd.zero_state();
    let (n_iter, converged) = cd.solve(lambda, &mut state, tol, max_iter);
    Ok(CdFit {
        beta: state.beta,
        n_iter,
        converged,
    })
}

/// Penalty factors `1 / max(|initⱼ|^γ, ε_w)`; a zero denominator gives `+∞`.
pub fn adaptive_factors(init: &DVector<f64>, gamma: f64, eps_w: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("adaptive lasso initial estimate"));
    }
    Ok(init
        .iter()
        .map(|b| {
            let w = b.abs().powf(gamma).max(eps_w);
            if w > 0.0 {
                1.0 / w
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

/// Adaptive Lasso at a single `λ` with weights `wⱼ = |initⱼ|^γ`.
pub fn adaptive_lasso_fit(
    data: &Dataset,
    lambda: f64,
    init: &DVector<f64>,
    gamma: f64,
    eps_w: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CdFit> {
    if init.len() != data.p() {
        return Err(Error::DimensionMismatch(format!(
            "initial estimate has {} entries for {} coefficients",
            init.len(),
            data.p()
        )));
    }
    let factors = adaptive_factors(init, gamma, eps_w)?;
    weighted_lasso_fit(data, factors, lambda, tol, max_iter)
}

/// A warm-started solution path over a descending `λ` grid.
#[derive(Debug, Clone)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub betas: Vec<DVector<f64>>,
    pub n_iter: Vec<usize>,
    pub converged: Vec<bool>,
    pub factors: Vec<f64>,
}

impl LassoPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Options for path construction and subset selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub method: Method,
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of `λ_max`.
    pub lambda_min_ratio: f64,
    /// Stop the path once `1 − RSS/TSS` reaches this value.
    pub max_dev_ratio: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub zero_tol: f64,
    /// Adaptive Lasso exponent on the initial estimate.
    pub gamma: f64,
    /// Floor on adaptive weights; zero excludes coefficients whose initial estimate is zero.
    pub eps_w: f64,
    /// Ridge penalty of the initial estimate when `p ≥ n`, as a fraction of `λ_max`.
    pub init_ridge_ratio: f64,
    /// Multiplier applied to the BIC choice of `λ` before the final fit.
    pub lambda_inflation: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            method: Method::Lasso,
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
            max_dev_ratio: Some(0.999),
            tol: 1e-7,
            max_iter: 100_000,
            zero_tol: 1e-10,
            gamma: 1.0,
            eps_w: 0.0,
            init_ridge_ratio: 1e-3,
            lambda_inflation: 1.0,
        }
    }
}

impl SelectionConfig {
    pub fn with_method(method: Method) -> Self {
        SelectionConfig {
            method,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_lambda == 0 {
            return Err(Error::InvalidArgument("n_lambda must be positive".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda_min_ratio must be in (0,1), got {}",
                self.lambda_min_ratio
            )));
        }
        if !(self.lambda_inflation > 0.0 && self.lambda_inflation.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda_inflation must be positive, got {}",
                self.lambda_inflation
            )));
        }
        if self.zero_tol < 0.0 {
            return Err(Error::InvalidArgument("zero_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Log-spaced grid from `lambda_max` down to `ratio · lambda_max`.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize, ratio: f64) -> Vec<f64> {
    if n_lambda == 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (n_lambda - 1) as f64;
    (0..n_lambda)
        .map(|k| lambda_max * (step * k as f64).exp())
        .collect()
}

/// Warm-started path with the given penalty factors.
pub fn weighted_path(data: &Dataset, factors: Vec<f64>, cfg: &SelectionConfig) -> Result<LassoPath> {
    cfg.validate()?;
    let cd = CoordinateDescent::new(data, factors)?;
    let lambda_max = cd.lambda_max();
    if lambda_max <= 0.0 {
        return Err(Error::InsufficientData(
            "response is orthogonal to every penalized column".into(),
        ));
    }
    let tss = data.y().norm_squared();
    let grid = lambda_grid(lambda_max, cfg.n_lambda, cfg.lambda_min_ratio);
    let mut state = cd.zero_state();
    let mut path = LassoPath {
        lambdas: Vec::new(),
        betas: Vec::new(),
        n_iter: Vec::new(),
        converged: Vec::new(),
        factors: cd.factors().to_vec(),
    };
    for lambda in grid {
        let (iters, ok) = cd.solve(lambda, &mut state, cfg.tol, cfg.max_iter);
        path.lambdas.push(lambda);
        path.betas.push(state.beta.clone());
        path.n_iter.push(iters);
        path.converged.push(ok);
        let active = state.beta.iter().filter(|b| b.abs() > cfg.zero_tol).count();
        let dev_ratio = if tss > 0.0 {
            1.0 - state.residual.norm_squared() / tss
        } else {
            1.0
        };
        if active >= data.n() || cfg.max_dev_ratio.is_some_and(|m| dev_ratio >= m) {
            break;
        }
    }
    Ok(path)
}

pub fn lasso_path(data: &Dataset, cfg: &SelectionConfig) -> Result<LassoPath> {
    weighted_path(data, vec![1.0; data.p()], cfg)
}

/// Initial estimate for the adaptive weights: least squares when `p < n`,
/// otherwise ridge with penalty `init_ridge_ratio · λ_max`.
pub fn adaptive_initial_estimate(data: &Dataset, cfg: &SelectionConfig) -> Result<DVector<f64>> {
    let x = data.x();
    let y = data.y();
    if data.p() < data.n() {
        return Ok(linalg::ginv_solve(&x.tr_mul(x), &x.tr_mul(y)));
    }
    let cd = CoordinateDescent::new(data, vec![1.0; data.p()])?;
    let ridge = cfg.init_ridge_ratio * cd.lambda_max();
    // (X'X + ρI)⁻¹X'y = X'(XX' + ρI)⁻¹y
    let mut gram = x * x.transpose();
    for i in 0..data.n() {
        gram[(i, i)] += ridge;
    }
    let chol = linalg::cholesky(gram, "ridge initial system")?;
    Ok(x.tr_mul(&chol.solve(y)))
}

pub fn adaptive_lasso_path(
    data: &Dataset,
    init: &DVector<f64>,
    cfg: &SelectionConfig,
) -> Result<LassoPath> {
    let factors = adaptive_factors(init, cfg.gamma, cfg.eps_w)?;
    weighted_path(data, factors, cfg)
}

/// The BIC-optimal point of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct BicChoice {
    pub index: usize,
    pub lambda: f64,
    pub beta: DVector<f64>,
    pub bic: f64,
}

/// `n·log(RSS/n) + df·log n` with `df` the number of nonzero coefficients.
pub fn bic_value(n: usize, rss: f64, df: usize) -> f64 {
    let nf = n as f64;
    if rss <= 0.0 {
        return f64::NEG_INFINITY;
    }
    nf * (rss / nf).ln() + df as f64 * nf.ln()
}

/// Picks the path entry with the smallest BIC.
///
/// Ties go to the larger `λ`. If some entries fit exactly (RSS = 0), the
/// sparsest of them is returned.
pub fn bic_select(data: &Dataset, path: &LassoPath) -> Result<BicChoice> {
    bic_select_with(data, path, 0.0)
}

pub fn bic_select_with(data: &Dataset, path: &LassoPath, zero_tol: f64) -> Result<BicChoice> {
    if path.is_empty() {
        return Err(Error::InvalidArgument("empty lasso path".into()));
    }
    let n = data.n();
    let mut best: Option<(usize, f64, usize)> = None;
    for (k, beta) in path.betas.iter().enumerate() {
        let rss = (data.y() - data.x() * beta).norm_squared();
        let df = beta.iter().filter(|b| b.abs() > zero_tol).count();
        let bic = bic_value(n, rss, df);
        let better = match best {
            None => true,
            Some((_, b, bdf)) => {
                if bic == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
                    df < bdf
                } else {
                    bic < b
                }
            }
        };
        if better {
            best = Some((k, bic, df));
        }
    }
    let (index, bic, _) = best.expect("nonempty path");
    Ok(BicChoice {
        index,
        lambda: path.lambdas[index],
        beta: path.betas[index].clone(),
        bic,
    })
}

/// `{j : |βⱼ| > zero_tol}`.
pub fn active_set(beta: &DVector<f64>, zero_tol: f64) -> Support {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > zero_tol)
        .map(|(j, _)| j)
        .collect()
}

/// Least-squares refit on `s`: `(X_s'X_s)⁻ X_s'y`, one entry per index of `s`.
pub fn restricted_ls(data: &Dataset, s: &Support) -> Result<DVector<f64>> {
    if s.is_empty() {
        return Err(Error::EmptySupport("restricted least squares needs a nonempty subset".into()));
    }
    s.check_within(data.p(), "subset")?;
    if s.len() > data.n() {
        return Err(Error::InvalidArgument(format!(
            "subset of size {} exceeds n = {}",
            s.len(),
            data.n()
        )));
    }
    let xs = linalg::columns(data.x(), s);
    Ok(linalg::ginv_solve(&xs.tr_mul(&xs), &xs.tr_mul(data.y())))
}

/// Step-1 output.
#[derive(Debug, Clone)]
pub struct Selection {
    pub method: Method,
    pub path: LassoPath,
    /// `λ` of the final fit (BIC choice times any inflation).
    pub lambda: f64,
    pub bic: f64,
    pub beta_pls: DVector<f64>,
    pub s1: Support,
}

/// Runs the configured path, chooses `λ` by BIC and extracts `Ŝ₁`.
pub fn select(data: &Dataset, cfg: &SelectionConfig) -> Result<Selection> {
    cfg.validate()?;
    let path = match cfg.method {
        Method::Lasso => lasso_path(data, cfg)?,
        Method::AdaptiveLasso => {
            let init = adaptive_initial_estimate(data, cfg)?;
            adaptive_lasso_path(data, &init, cfg)?
        }
    };
    let choice = bic_select_with(data, &path, cfg.zero_tol)?;
    let (lambda, beta) = if cfg.lambda_inflation != 1.0 {
        let lambda = choice.lambda * cfg.lambda_inflation;
        let cd = CoordinateDescent::new(data, path.factors.clone())?;
        let mut state = cd.state_from(choice.beta.clone());
        cd.solve(lambda, &mut state, cfg.tol, cfg.max_iter);
        (lambda, state.beta)
    } else {
        (choice.lambda, choice.beta)
    };
    let s1 = active_set(&beta, cfg.zero_tol);
    Ok(Selection {
        method: cfg.method,
        path,
        lambda,
        bic: choice.bic,
        beta_pls: beta,
        s1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{center, simulate_case, Case};

    /// Design with `X'X = nI`: centered ±1 Hadamard-style columns.
    fn orthonormal(n: usize, p: usize, y: &[f64]) -> Dataset {
        assert!(n.is_power_of_two() && p < n);
        let mut x = DMatrix::zeros(n, p);
        for j in 0..p {
            // Walsh functions 1..=p are mutually orthogonal and zero-mean
            for i in 0..n {
                let bits = ((i & (j + 1)) as u32).count_ones();
                x[(i, j)] = if bits % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        center(&x, &DVector::from_column_slice(y)).unwrap()
    }

    #[test]
    fn orthonormal_soft_threshold_example() {
        // β̃₁ = 2 and λ/(2n) = 0.5 give 1.5.
        let n = 8;
        let mut data = orthonormal(n, 3, &[0.0; 8]);
        let target = DVector::from_vec(vec![2.0, -0.3, 0.0]);
        let y = data.x() * &target;
        data = center(data.x(), &y).unwrap();
        let lambda = 0.5 * 2.0 * n as f64;
        let fit = lasso_fit(&data, lambda, 1e-12, 1000).unwrap();
        assert!(fit.converged);
        assert!((fit.beta[0] - 1.5).abs() < 1e-12);
        assert_eq!(fit.beta[1], 0.0);
        assert_eq!(fit.beta[2], 0.0);
    }

    #[test]
    fn zero_at_lambda_max() {
        let (d, _) = simulate_case(Case::One, 40, 20, 1.0, 2).unwrap();
        let xty = d.x().tr_mul(d.y());
        let lmax = 2.0 * xty.amax();
        let fit = lasso_fit(&d, lmax, 1e-9, 1000).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        let just_below = lasso_fit(&d, 0.99 * lmax, 1e-9, 1000).unwrap();
        assert_eq!(active_set(&just_below.beta, 0.0).len(), 1);
    }

    #[test]
    fn small_lambda_matches_least_squares() {
        let (raw, _) = simulate_case(Case::One, 10, 13, 1.0, 8).unwrap();
        let d = center(&raw.x().columns(0, 3).into_owned(), raw.y()).unwrap();
        let ls = restricted_ls(&d, &Support::range(0, 3)).unwrap();
        let fit = lasso_fit(&d, 1e-9, 1e-13, 1_000_000).unwrap();
        assert!((fit.beta - ls).amax() < 1e-6);
    }

    #[test]
    fn non_convergence_is_reported() {
        let (d, _) = simulate_case(Case::One, 30, 40, 1.0, 1).unwrap();
        let fit = lasso_fit(&d, 1e-3, 1e-14, 2).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.n_iter, 2);
        assert!(lasso_fit(&d, 0.0, 1e-7, 10).is_err());
        assert!(lasso_fit(&d, 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        let (d, _) = simulate_case(Case::One, 50, 80, 1.0, 4).unwrap();
        let cd = CoordinateDescent::new(&d, vec![1.0; d.p()]).unwrap();
        let lambda = 0.05 * cd.lambda_max();
        let mut state = cd.zero_state();
        let mut prev = cd.objective(&state.beta, lambda);
        for _ in 0..200 {
            cd.sweep(lambda, &mut state);
            let obj = cd.objective(&state.beta, lambda);
            assert!(obj <= prev * (1.0 + 1e-13) + 1e-12, "{obj} > {prev}");
            prev = obj;
        }
    }

    #[test]
    fn kkt_conditions_hold_at_convergence() {
        let (d, _) = simulate_case(Case::One, 60, 100, 1.0, 5).unwrap();
        let cd = CoordinateDescent::new(&d, vec![1.0; d.p()]).unwrap();
        let lambda = 0.1 * cd.lambda_max();
        let tol = 1e-9;
        let fit = lasso_fit(&d, lambda, tol, 100_000).unwrap();
        assert!(fit.converged);
        let max_norm = d.x().column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        let max_sq = max_norm * max_norm;
        // one sweep of size < tol moves each gradient entry by at most ‖xⱼ‖²·tol·p
        assert!(cd.kkt_violation(&fit.beta, lambda) <= tol * max_sq * d.p() as f64);
    }

    #[test]
    fn adaptive_with_unit_weights_is_lasso() {
        let (d, _) = simulate_case(Case::One, 40, 30, 1.0, 6).unwrap();
        let ones = DVector::from_element(d.p(), 1.0);
        let a = adaptive_lasso_fit(&d, 50.0, &ones, 1.0, 0.0, 1e-8, 10_000).unwrap();
        let b = lasso_fit(&d, 50.0, 1e-8, 10_000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adaptive_zero_init_excludes_coefficient() {
        let (d, _) = simulate_case(Case::One, 40, 20, 1.0, 6).unwrap();
        let mut init = DVector::from_element(d.p(), 1.0);
        init[0] = 0.0; // the strongest signal
        let fit = adaptive_lasso_fit(&d, 1.0, &init, 1.0, 0.0, 1e-8, 10_000).unwrap();
        assert_eq!(fit.beta[0], 0.0);
        assert!(fit.beta[1] != 0.0);
        // with a floor the coefficient can enter again
        let floored = adaptive_lasso_fit(&d, 1.0, &init, 1.0, 1e-3, 1e-8, 10_000).unwrap();
        assert!(floored.beta[0] != 0.0);
    }

    #[test]
    fn adaptive_orthonormal_weighted_threshold() {
        let n = 16;
        let base = orthonormal(n, 4, &[0.0; 16]);
        let target = DVector::from_vec(vec![2.0, -1.0, 0.8, 0.4]);
        let y = base.x() * &target;
        let d = center(base.x(), &y).unwrap();
        let init = DVector::from_vec(vec![2.0, 0.5, 1.0, 0.25]);
        let lambda = 8.0;
        let fit = adaptive_lasso_fit(&d, lambda, &init, 1.0, 0.0, 1e-13, 1000).unwrap();
        for j in 0..4 {
            let thr = lambda / (2.0 * n as f64 * init[j].abs());
            let b = target[j];
            let expect = b.signum() * (b.abs() - thr).max(0.0);
            assert!((fit.beta[j] - expect).abs() < 1e-12, "j={j}: {} vs {expect}", fit.beta[j]);
        }
    }

    #[test]
    fn path_is_descending_and_starts_at_zero() {
        let (d, _) = simulate_case(Case::One, 50, 60, 1.0, 7).unwrap();
        let cfg = SelectionConfig::default();
        let path = lasso_path(&d, &cfg).unwrap();
        assert!(path.lambdas.windows(2).all(|w| w[0] > w[1]));
        assert!(path.betas[0].iter().all(|&b| b == 0.0));
        assert!(path.converged.iter().all(|&c| c));
    }

    fn path_of(lambdas: Vec<f64>, betas: Vec<DVector<f64>>) -> LassoPath {
        let k = lambdas.len();
        LassoPath {
            lambdas,
            betas,
            n_iter: vec![1; k],
            converged: vec![true; k],
            factors: vec![],
        }
    }

    #[test]
    fn bic_singleton_and_ties() {
        let (d, _) = simulate_case(Case::One, 30, 13, 1.0, 9).unwrap();
        let b = DVector::zeros(13);
        let single = path_of(vec![3.0], vec![b.clone()]);
        assert_eq!(bic_select(&d, &single).unwrap().index, 0);
        let tied = path_of(vec![5.0, 2.0], vec![b.clone(), b.clone()]);
        let choice = bic_select(&d, &tied).unwrap();
        assert_eq!(choice.lambda, 5.0);
    }

    #[test]
    fn bic_prefers_sparsest_perfect_fit() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 1.0, 2.0, -1.0, -2.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, 2.0, -2.0]);
        let d = center(&x, &y).unwrap();
        let exact = DVector::from_vec(vec![1.0, 0.0]);
        assert!((d.y() - d.x() * &exact).norm() == 0.0);
        let dense = DVector::from_vec(vec![1.0, 1e-3]);
        let path = path_of(vec![3.0, 2.0, 1.0], vec![DVector::zeros(2), dense, exact.clone()]);
        let choice = bic_select(&d, &path).unwrap();
        assert_eq!(choice.index, 2);
        assert_eq!(choice.bic, f64::NEG_INFINITY);
    }

    #[test]
    fn active_set_threshold() {
        assert!(active_set(&DVector::zeros(4), 1e-10).is_empty());
        let b = DVector::from_vec(vec![1e-16, 0.3]);
        assert_eq!(active_set(&b, 1e-12).indices(), &[1]);
    }

    #[test]
    fn restricted_ls_normal_equations() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 1.0, 3.0, 5.0, 4.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 2.0, 5.0]);
        let d = center(&x, &y).unwrap();
        let s = Support::range(0, 2);
        let re = restricted_ls(&d, &s).unwrap();
        // normal equations on centered data by explicit 2x2 inverse
        let g = d.x().tr_mul(d.x());
        let b = d.x().tr_mul(d.y());
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let b0 = (g[(1, 1)] * b[0] - g[(0, 1)] * b[1]) / det;
        let b1 = (g[(0, 0)] * b[1] - g[(1, 0)] * b[0]) / det;
        assert!((re[0] - b0).abs() < 1e-10 && (re[1] - b1).abs() < 1e-10);
        let r = d.y() - d.x() * &re;
        assert!(d.x().tr_mul(&r).amax() < 1e-8 * d.y().norm());
        assert!(restricted_ls(&d, &Support::empty()).is_err());
    }

    #[test]
    fn restricted_ls_noiseless_recovery_and_singular() {
        let (raw, _) = simulate_case(Case::One, 30, 13, 1.0, 12).unwrap();
        let beta = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let y = raw.x().columns(0, 3) * &beta;
        let d = center(raw.x(), &y).unwrap();
        let re = restricted_ls(&d, &Support::new(vec![0, 1, 2, 7])).unwrap();
        assert!((re.rows(0, 3) - &beta).amax() < 1e-10);
        assert!(re[3].abs() < 1e-10);
        // duplicate column: generalized inverse splits the weight evenly
        let mut x = raw.x().columns(0, 2).into_owned();
        x = x.insert_column(2, 0.0);
        let c0 = x.column(0).into_owned();
        x.set_column(2, &c0);
        let y2 = x.column(0) * 2.0;
        let d2 = center(&x, &y2).unwrap();
        let re2 = restricted_ls(&d2, &Support::new(vec![0, 2])).unwrap();
        assert!((re2[0] - 1.0).abs() < 1e-8 && (re2[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn select_returns_consistent_support() {
        let (d, truth) = simulate_case(Case::One, 100, 120, 1.0, 21).unwrap();
        for method in [Method::Lasso, Method::AdaptiveLasso] {
            let sel = select(&d, &SelectionConfig::with_method(method)).unwrap();
            assert_eq!(sel.s1, active_set(&sel.beta_pls, 1e-10));
            assert!(truth.partition.s1.is_subset(&sel.s1), "{method}: {}", sel.s1);
        }
        let inflated = select(
            &d,
            &SelectionConfig {
                lambda_inflation: 3.0,
                ..Default::default()
            },
        )
        .unwrap();
        let plain = select(&d, &SelectionConfig::default()).unwrap();
        assert!(inflated.s1.len() <= plain.s1.len());
        assert!((inflated.lambda - 3.0 * plain.lambda).abs() < 1e-9 * plain.lambda);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("lasso".parse::<Method>().unwrap(), Method::Lasso);
        assert_eq!("ALasso".parse::<Method>().unwrap(), Method::AdaptiveLasso);
        assert!("scad".parse::<Method>().is_err());
    }
}
