//! Gram-matrix block algebra and asymptotic distributional risks (ADR) of
//! the estimators along a direction `d₁` on the strong set.
//!
//! Closed forms cover WR and RE. The SE and PSE risks are expectations of
//! `g₁`, `g₂` under `x = z₂ + δ` with `z₂ ~ N(0, σ²Σ₂₂.₁⁻¹)` and are
//! estimated by Monte Carlo at finite `p₂`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::support::Support;

/// Blocks of `Σ` over `(S₁, S₂)` and both Schur complements.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaBlocks {
    pub s11: DMatrix<f64>,
    pub s12: DMatrix<f64>,
    pub s21: DMatrix<f64>,
    pub s22: DMatrix<f64>,
    /// `Σ₂₂ − Σ₂₁Σ₁₁⁻¹Σ₁₂`.
    pub s22_1: DMatrix<f64>,
    /// `Σ₁₁ − Σ₁₂Σ₂₂⁻¹Σ₂₁`.
    pub s11_2: DMatrix<f64>,
}

fn inverse(a: &DMatrix<f64>, allow_pinv: bool, what: &str) -> Result<DMatrix<f64>> {
    let sym = linalg::symmetrize(a);
    match Cholesky::new(sym.clone()) {
        Some(ch) => Ok(ch.inverse()),
        None if allow_pinv => Ok(linalg::pinv_sym(&sym)),
        None => Err(Error::Singular(format!("{what} is singular"))),
    }
}

impl SigmaBlocks {
    /// Splits a symmetric `(p₁ + p₂)`-square matrix after its first `p1`
    /// rows and columns.
    pub fn from_gram(sigma: &DMatrix<f64>, p1: usize, allow_pinv: bool) -> Result<Self> {
        let p = sigma.nrows();
        if sigma.ncols() != p {
            return Err(Error::DimensionMismatch(format!("Σ is {}x{}", p, sigma.ncols())));
        }
        if p1 == 0 || p1 >= p {
            return Err(Error::InvalidArgument(format!("need 1 <= p1 < {p}, got {p1}")));
        }
        let p2 = p - p1;
        let s11 = sigma.view((0, 0), (p1, p1)).into_owned();
        let s12 = sigma.view((0, p1), (p1, p2)).into_owned();
        let s21 = sigma.view((p1, 0), (p2, p1)).into_owned();
        let s22 = sigma.view((p1, p1), (p2, p2)).into_owned();
        let s11_inv = inverse(&s11, allow_pinv, "Σ₁₁")?;
        let s22_inv = inverse(&s22, allow_pinv, "Σ₂₂")?;
        let s22_1 = linalg::symmetrize(&(&s22 - &s21 * &s11_inv * &s12));
        let s11_2 = linalg::symmetrize(&(&s11 - &s12 * &s22_inv * &s21));
        Ok(SigmaBlocks {
            s11,
            s12,
            s21,
            s22,
            s22_1,
            s11_2,
        })
    }

    pub fn p1(&self) -> usize {
        self.s11.nrows()
    }

    pub fn p2(&self) -> usize {
        self.s22.nrows()
    }
}

/// Blocks of `Z'Z/n` with `S₁` the first `p1` columns of `z`.
pub fn sigma_blocks(z: &DMatrix<f64>, p1: usize, allow_pinv: bool) -> Result<SigmaBlocks> {
    let n = z.nrows();
    if n == 0 {
        return Err(Error::InsufficientData("Z has no rows".into()));
    }
    SigmaBlocks::from_gram(&(z.tr_mul(z) / n as f64), p1, allow_pinv)
}

/// Direction, weak-signal vector and covariance blocks for the ADR formulas.
#[derive(Debug, Clone)]
pub struct AdrInputs {
    pub d1: DVector<f64>,
    pub delta: DVector<f64>,
    pub sigma: f64,
    pub blocks: SigmaBlocks,
    /// `Σ₂₁Σ₁₁⁻¹d₁`.
    pub d2: DVector<f64>,
    /// `σ² d₂'Σ₂₂.₁⁻¹d₂`.
    pub s2n2: f64,
    /// `σ² d₁'Σ₁₁.₂⁻¹d₁`.
    pub s1n2: f64,
    /// `d₁'Σ₁₁⁻¹d₁ / d₁'Σ₁₁.₂⁻¹d₁`.
    pub c: f64,
    s22_1_chol: Cholesky<f64, Dyn>,
}

impl AdrInputs {
    pub fn new(d1: DVector<f64>, delta: DVector<f64>, sigma: f64, blocks: SigmaBlocks) -> Result<Self> {
        if d1.len() != blocks.p1() || delta.len() != blocks.p2() {
            return Err(Error::DimensionMismatch(format!(
                "d1 has {} entries and δ has {} for blocks of size {} and {}",
                d1.len(),
                delta.len(),
                blocks.p1(),
                blocks.p2()
            )));
        }
        let norm = d1.norm();
        if !(norm > 0.0 && norm <= 1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("need 0 < ‖d1‖ <= 1, got {norm}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("σ must be positive, got {sigma}")));
        }
        if !delta.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("δ"));
        }
        let s11 = linalg::cholesky(linalg::symmetrize(&blocks.s11), "Σ₁₁")?;
        let s11_2 = linalg::cholesky(blocks.s11_2.clone(), "Σ₁₁.₂")?;
        let s22_1_chol = linalg::cholesky(blocks.s22_1.clone(), "Σ₂₂.₁")?;
        let s11_inv_d1 = s11.solve(&d1);
        let d2 = &blocks.s21 * &s11_inv_d1;
        let q11 = d1.dot(&s11_inv_d1);
        let q11_2 = d1.dot(&s11_2.solve(&d1));
        let s2n2 = sigma * sigma * d2.dot(&s22_1_chol.solve(&d2));
        Ok(AdrInputs {
            c: (q11 / q11_2).min(1.0),
            s1n2: sigma * sigma * q11_2,
            s2n2,
            d2,
            d1,
            delta,
            sigma,
            blocks,
            s22_1_chol,
        })
    }

    /// One strong coefficient correlated with the first of `p2` unit-variance
    /// weak covariates, `Σ₁₂ = ρe₁'` with `ρ² = 1 − c`, so that the ratio `c`
    /// is exactly the requested value. `δ` has all entries equal and norm
    /// `delta_norm`.
    pub fn canonical(c: f64, p2: usize, delta_norm: f64, sigma: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidArgument(format!("c must be in (0, 1], got {c}")));
        }
        if p2 == 0 {
            return Err(Error::InvalidArgument("p2 must be positive".into()));
        }
        if !(delta_norm >= 0.0 && delta_norm.is_finite()) {
            return Err(Error::InvalidArgument(format!("‖δ‖ must be nonnegative, got {delta_norm}")));
        }
        let rho = (1.0 - c).sqrt();
        let mut sigma_full = DMatrix::identity(p2 + 1, p2 + 1);
        sigma_full[(0, 1)] = rho;
        sigma_full[(1, 0)] = rho;
        // ρ = 1 would make Σ singular; c > 0 keeps ρ < 1
        let blocks = SigmaBlocks::from_gram(&sigma_full, 1, false)?;
        let delta = DVector::from_element(p2, delta_norm / (p2 as f64).sqrt());
        AdrInputs::new(DVector::from_element(1, 1.0), delta, sigma, blocks)
    }

    pub fn p2(&self) -> usize {
        self.delta.len()
    }

    /// `δ'Σ₂₂.₁δ`.
    pub fn delta_quadratic(&self) -> f64 {
        self.delta.dot(&(&self.blocks.s22_1 * &self.delta))
    }
}

/// `Δ = (d₂'δ)² / d₂'Σ₂₂.₁⁻¹d₂`.
pub fn delta_d1n(inputs: &AdrInputs) -> Result<f64> {
    let denom = inputs.s2n2 / (inputs.sigma * inputs.sigma);
    if !(denom > 0.0) {
        return Err(Error::ZeroDenominator("d₂'Σ₂₂.₁⁻¹d₂ vanishes: d₁ carries no cross information"));
    }
    Ok(inputs.d2.dot(&inputs.delta).powi(2) / denom)
}

/// WR is the reference: its risk is identically one.
pub fn adr_wr() -> f64 {
    1.0
}

/// `1 − (1 − c)(1 − Δ)`.
pub fn adr_re_value(c: f64, delta: f64) -> f64 {
    1.0 - (1.0 - c) * (1.0 - delta)
}

pub fn adr_re(inputs: &AdrInputs) -> Result<f64> {
    if inputs.c >= 1.0 {
        return Ok(1.0);
    }
    Ok(adr_re_value(inputs.c, delta_d1n(inputs)?))
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Which shrinkage risk to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkKind {
    Se,
    Pse,
}

/// `g₁` from `Q = x'Σ₂₂.₁x/σ²` and `t = (d₂'x)²/s₂ₙ²`.
pub fn g1(one_minus_c: f64, p2: usize, q: f64, t: f64) -> f64 {
    let p = p2 as f64;
    one_minus_c * (p - 2.0) / q * (2.0 - (p + 2.0) * t / q)
}

/// `g₂`: `g₁` when `Q ≥ p₂ − 2`, otherwise `(1 − c)(2 − t)`.
pub fn g2(one_minus_c: f64, p2: usize, q: f64, t: f64) -> f64 {
    if q >= p2 as f64 - 2.0 {
        g1(one_minus_c, p2, q, t)
    } else {
        one_minus_c * (2.0 - t)
    }
}

const MC_CHUNK: usize = 4096;

/// `1 − E[g(z₂ + δ)]` by Monte Carlo.
///
/// With `L` the Cholesky factor of `Σ₂₂.₁`, `z₂ = σL⁻ᵀw` for standard normal
/// `w`. In the whitened coordinates `u = Lᵀx/σ = w + Lᵀδ/σ` the two
/// statistics become `Q = ‖u‖²` and `t = (e'u)²` with `e ∝ L⁻¹d₂`, so each
/// draw costs `O(p₂)`.
pub fn adr_mc(inputs: &AdrInputs, kind: ShrinkKind, p2: usize, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if p2 != inputs.p2() {
        return Err(Error::DimensionMismatch(format!(
            "p2 = {p2} but δ has {} entries",
            inputs.p2()
        )));
    }
    if p2 <= 2 {
        return Err(Error::InvalidArgument(format!("shrinkage risk needs p2 >= 3, got {p2}")));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n_samples}")));
    }
    let one_minus_c = 1.0 - inputs.c;
    if one_minus_c <= 0.0 {
        return Ok(McEstimate {
            estimate: 1.0,
            std_error: 0.0,
            samples: n_samples,
        });
    }
    let l = inputs.s22_1_chol.l();
    let mu = l.tr_mul(&inputs.delta) / inputs.sigma;
    let v = l
        .solve_lower_triangular(&inputs.d2)
        .ok_or_else(|| Error::Singular("Σ₂₂.₁ factor".into()))?;
    let vnorm = v.norm();
    if !(vnorm > 0.0) {
        return Err(Error::ZeroDenominator("s₂ₙ = 0: d₁ carries no cross information"));
    }
    let e = v / vnorm;
    let g = match kind {
        ShrinkKind::Se => g1,
        ShrinkKind::Pse => g2,
    };

    let n_chunks = n_samples.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut r = rng::seeded(rng::derive_seed(seed, &[chunk as u64]));
            let count = MC_CHUNK.min(n_samples - chunk * MC_CHUNK);
            let mut u = DVector::zeros(p2);
            let (mut s, mut ss) = (0.0, 0.0);
            for _ in 0..count {
                for k in 0..p2 {
                    let w: f64 = StandardNormal.sample(&mut r);
                    u[k] = w + mu[k];
                }
                let q = u.norm_squared();
                let t = e.dot(&u).powi(2);
                let val = g(one_minus_c, p2, q, t);
                s += val;
                ss += val * val;
            }
            (s, ss)
        })
        .collect();
    let (s, ss) = sums.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let n = n_samples as f64;
    let mean = s / n;
    let var = ((ss - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        estimate: 1.0 - mean,
        std_error: (var / n).sqrt(),
        samples: n_samples,
    })
}

pub fn adr_se_mc(inputs: &AdrInputs, p2: usize, n_samples: usize, seed: u64) -> Result<McEstimate> {
    adr_mc(inputs, ShrinkKind::Se, p2, n_samples, seed)
}

pub fn adr_pse_mc(inputs: &AdrInputs, p2: usize, n_samples: usize, seed: u64) -> Result<McEstimate> {
    adr_mc(inputs, ShrinkKind::Pse, p2, n_samples, seed)
}

/// `√n · d'(β̂ − β*) / sₙ` with `sₙ² = σ² d'Σₙ⁻¹d` and `Σₙ` the Gram matrix
/// of the columns in `s` divided by `n`.
pub fn standardized_error(
    data: &Dataset,
    s: &Support,
    beta_hat: &DVector<f64>,
    beta_star: &DVector<f64>,
    d: &DVector<f64>,
    sigma: f64,
) -> Result<f64> {
    s.check_within(data.p(), "S₃ᶜ")?;
    let k = s.len();
    if beta_hat.len() != k || beta_star.len() != k || d.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "vectors must have |S₃ᶜ| = {k} entries"
        )));
    }
    if d.norm() > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument("need ‖d‖ <= 1".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("σ must be positive, got {sigma}")));
    }
    let n = data.n() as f64;
    let xs = linalg::columns(data.x(), s);
    let gram = linalg::symmetrize(&(xs.tr_mul(&xs) / n));
    let chol = linalg::cholesky(gram, "Σₙ on S₃ᶜ")?;
    let sn2 = sigma * sigma * d.dot(&chol.solve(d));
    if !(sn2 > 0.0) {
        return Err(Error::ZeroDenominator("d'Σₙ⁻¹d = 0"));
    }
    Ok(n.sqrt() * d.dot(&(beta_hat - beta_star)) / sn2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn random_spd(dim: usize, seed: u64) -> DMatrix<f64> {
        let mut r = seeded(seed);
        let a = DMatrix::from_fn(dim + 3, dim, |_, _| r.sample::<f64, _>(StandardNormal));
        a.tr_mul(&a) / (dim + 3) as f64 + DMatrix::identity(dim, dim) * 0.1
    }

    #[test]
    fn identity_blocks() {
        let b = SigmaBlocks::from_gram(&DMatrix::identity(5, 5), 2, false).unwrap();
        assert_eq!(b.s22_1, DMatrix::identity(3, 3));
        assert_eq!(b.s11_2, DMatrix::identity(2, 2));
    }

    #[test]
    fn hand_schur_complement() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let b = SigmaBlocks::from_gram(&s, 1, false).unwrap();
        assert!((b.s22_1[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((b.s11_2[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn schur_ordering_and_identity() {
        for seed in 0..20 {
            let s = random_spd(7, seed);
            let b = SigmaBlocks::from_gram(&s, 3, false).unwrap();
            let diff = &b.s22 - &b.s22_1;
            let eig = nalgebra::SymmetricEigen::new(diff).eigenvalues;
            assert!(eig.min() > -1e-10);
            let s11_inv = b.s11.clone().try_inverse().unwrap();
            let lhs = &s11_inv * &b.s12 * b.s22_1.clone().try_inverse().unwrap() * &b.s21 * &s11_inv;
            let rhs = b.s11_2.clone().try_inverse().unwrap() - &s11_inv;
            assert!((lhs - rhs).amax() < 1e-8);
        }
    }

    #[test]
    fn singular_block_needs_pinv() {
        let z = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 0.5, 2.0, 2.0, -1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        assert!(sigma_blocks(&z, 2, false).is_err());
        assert!(sigma_blocks(&z, 2, true).is_ok());
    }

    #[test]
    fn canonical_has_requested_c() {
        for &c in &[0.1, 0.5, 0.9, 1.0] {
            let a = AdrInputs::canonical(c, 6, 0.5, 1.0).unwrap();
            assert!((a.c - c).abs() < 1e-12);
            assert!((a.delta.norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_values() {
        let a = AdrInputs::canonical(0.5, 5, 0.0, 1.0).unwrap();
        assert_eq!(delta_d1n(&a).unwrap(), 0.0);

        // p1 = 1, p2 = 2 worked example
        let s = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, -0.3, 0.5, 1.5, 0.2, -0.3, 0.2, 1.0]);
        let blocks = SigmaBlocks::from_gram(&s, 1, false).unwrap();
        let d1 = DVector::from_element(1, 0.8);
        let delta = DVector::from_vec(vec![0.7, -0.4]);
        let a = AdrInputs::new(d1, delta.clone(), 1.0, blocks.clone()).unwrap();
        let d2 = DVector::from_vec(vec![0.5 * 0.8 / 2.0, -0.3 * 0.8 / 2.0]);
        let s22_1 = DMatrix::from_row_slice(2, 2, &[1.5 - 0.25 / 2.0, 0.2 + 0.15 / 2.0, 0.2 + 0.15 / 2.0, 1.0 - 0.09 / 2.0]);
        let num = d2.dot(&delta).powi(2);
        let den = d2.dot(&(s22_1.try_inverse().unwrap() * &d2));
        assert!((delta_d1n(&a).unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn adr_re_arithmetic() {
        assert!((adr_re_value(0.5, 0.2) - 0.6).abs() < 1e-15);
        assert_eq!(adr_re_value(0.3, 1.0), 1.0);
        assert_eq!(adr_re_value(1.0, 0.4), 1.0);
        assert_eq!(adr_re(&AdrInputs::canonical(1.0, 4, 0.3, 1.0).unwrap()).unwrap(), 1.0);
        assert_eq!(adr_wr(), 1.0);
    }

    #[test]
    fn mc_unit_c_is_exactly_one() {
        let a = AdrInputs::canonical(1.0, 8, 0.5, 1.0).unwrap();
        assert_eq!(adr_se_mc(&a, 8, 10_000, 1).unwrap().estimate, 1.0);
        assert_eq!(adr_pse_mc(&a, 8, 10_000, 1).unwrap().estimate, 1.0);
    }

    #[test]
    fn mc_rejects_small_p2_and_mismatch() {
        let a = AdrInputs::canonical(0.5, 2, 0.0, 1.0).unwrap();
        assert!(adr_se_mc(&a, 2, 10_000, 1).is_err());
        let b = AdrInputs::canonical(0.5, 5, 0.0, 1.0).unwrap();
        assert!(adr_se_mc(&b, 6, 10_000, 1).is_err());
    }

    #[test]
    fn mc_is_deterministic() {
        let a = AdrInputs::canonical(0.4, 6, 0.7, 1.0).unwrap();
        let x = adr_pse_mc(&a, 6, 20_000, 9).unwrap();
        let y = adr_pse_mc(&a, 6, 20_000, 9).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn mc_fixed_p2_at_zero_delta() {
        let a = AdrInputs::canonical(0.5, 10, 0.0, 1.0).unwrap();
        let se = adr_se_mc(&a, 10, 200_000, 3).unwrap();
        assert!((se.estimate - 0.6).abs() < 3.0 * se.std_error, "{se:?}");
    }

    #[test]
    fn mc_scales_with_sigma() {
        // σ enters both Q and s₂ₙ² so the risks do not depend on it
        let a = AdrInputs::canonical(0.5, 7, 0.8, 1.0).unwrap();
        let b = AdrInputs::canonical(0.5, 7, 0.8 * 3.0, 3.0).unwrap();
        let x = adr_pse_mc(&a, 7, 50_000, 4).unwrap();
        let y = adr_pse_mc(&b, 7, 50_000, 4).unwrap();
        assert!((x.estimate - y.estimate).abs() < 1e-9);
    }

    #[test]
    fn standardized_error_basics() {
        let (d, _) = crate::dataset::simulate_case(crate::dataset::Case::One, 50, 13, 1.0, 5).unwrap();
        let s = Support::range(0, 4);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let dir = DVector::from_vec(vec![0.5, 0.5, 0.5, 0.5]);
        assert_eq!(standardized_error(&d, &s, &b, &b, &dir, 1.0).unwrap(), 0.0);
        let off = DVector::from_vec(vec![0.1, -0.2, 0.0, 0.3]);
        let one = standardized_error(&d, &s, &(&b + &off), &b, &dir, 1.0).unwrap();
        let two = standardized_error(&d, &s, &(&b + &off * 2.0), &b, &dir, 1.0).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
    }
}
