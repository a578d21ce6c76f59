//! Evaluation metrics and the simulation harness.

mod cv;
mod sim;

pub use cv::{cv_prediction_error, CvPredictionReport, EstimatorError};
pub use sim::{p_grid_from_tau, read_report, run_table, write_report, RiskReport, RiskRow, SimConfig};

use nalgebra::DVector;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::support::Support;

/// Ratio of two sample means with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub value: f64,
    /// `None` with a single replication.
    pub std_error: Option<f64>,
}

/// `mean(num) / mean(den)`.
pub fn ratio_of_means(num: &[f64], den: &[f64]) -> Result<RatioEstimate> {
    if num.len() != den.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} numerators and {} denominators",
            num.len(),
            den.len()
        )));
    }
    let m = num.len();
    if m == 0 {
        return Err(Error::InsufficientData("no replications".into()));
    }
    let mf = m as f64;
    let a = num.iter().sum::<f64>() / mf;
    let b = den.iter().sum::<f64>() / mf;
    if !(b > 0.0) {
        return Err(Error::ZeroDenominator("mean squared error of the candidate is zero"));
    }
    let r = a / b;
    let std_error = (m > 1).then(|| {
        let (mut va, mut vb, mut cab) = (0.0, 0.0, 0.0);
        for (x, y) in num.iter().zip(den) {
            va += (x - a) * (x - a);
            vb += (y - b) * (y - b);
            cab += (x - a) * (y - b);
        }
        let d = mf - 1.0;
        let var = (va / d - 2.0 * r * cab / d + r * r * vb / d) / (b * b * mf);
        var.max(0.0).sqrt()
    });
    Ok(RatioEstimate { value: r, std_error })
}

/// Relative mean squared error of a candidate against WR over replications:
/// `mean‖β̂^WR − β*‖² / mean‖β̂ − β*‖²`. Values above one favor the candidate.
///
/// Each pair holds `(WR, candidate)` already aligned to the coordinates of
/// `beta_star_s1`.
pub fn rmse(beta_star_s1: &DVector<f64>, estimates: &[(DVector<f64>, DVector<f64>)]) -> Result<f64> {
    Ok(rmse_estimate(beta_star_s1, estimates)?.value)
}

pub fn rmse_estimate(beta_star_s1: &DVector<f64>, estimates: &[(DVector<f64>, DVector<f64>)]) -> Result<RatioEstimate> {
    if estimates.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "RMSE needs at least 2 replications, got {}",
            estimates.len()
        )));
    }
    let mut num = Vec::with_capacity(estimates.len());
    let mut den = Vec::with_capacity(estimates.len());
    for (wr, cand) in estimates {
        if wr.len() != beta_star_s1.len() || cand.len() != beta_star_s1.len() {
            return Err(Error::DimensionMismatch("estimate length differs from β*".into()));
        }
        num.push((wr - beta_star_s1).norm_squared());
        den.push((cand - beta_star_s1).norm_squared());
    }
    ratio_of_means(&num, &den)
}

/// Relative residual sum of squares on the columns `s`:
/// `‖y − X_s β̂^WR_s‖² / ‖y − X_s β̂_s‖²`.
pub fn rrss(data: &Dataset, s: &Support, beta_wr_s: &DVector<f64>, beta_candidate_s: &DVector<f64>) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySupport("RRSS needs a nonempty subset".into()));
    }
    s.check_within(data.p(), "subset")?;
    if beta_wr_s.len() != s.len() || beta_candidate_s.len() != s.len() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient vectors must have {} entries",
            s.len()
        )));
    }
    let xs = linalg::columns(data.x(), s);
    let num = (data.y() - &xs * beta_wr_s).norm_squared();
    let den = (data.y() - &xs * beta_candidate_s).norm_squared();
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator("candidate residual sum of squares is zero"));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::center;
    use nalgebra::DMatrix;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn rmse_identity_is_one() {
        let star = v(&[1.0, 2.0]);
        let reps = vec![(v(&[1.5, 2.0]), v(&[1.5, 2.0])), (v(&[0.0, 1.0]), v(&[0.0, 1.0]))];
        assert_eq!(rmse(&star, &reps).unwrap(), 1.0);
    }

    #[test]
    fn rmse_hand_example() {
        let star = v(&[1.0]);
        // WR errors 0.25 and 1.0, candidate errors 0.01 and 0.09
        let reps = vec![(v(&[1.5]), v(&[1.1])), (v(&[0.0]), v(&[0.7]))];
        let expect = ((0.25 + 1.0) / 2.0) / ((0.01 + 0.09) / 2.0);
        assert!((rmse(&star, &reps).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn rmse_degenerate_cases() {
        let star = v(&[1.0]);
        let perfect = vec![(v(&[1.5]), v(&[1.0])), (v(&[0.0]), v(&[1.0]))];
        assert!(matches!(rmse(&star, &perfect), Err(Error::ZeroDenominator(_))));
        assert!(rmse(&star, &perfect[..1]).is_err());
    }

    #[test]
    fn ratio_single_draw_has_no_se() {
        let r = ratio_of_means(&[2.0], &[4.0]).unwrap();
        assert_eq!(r.value, 0.5);
        assert!(r.std_error.is_none());
        assert!(ratio_of_means(&[2.0, 3.0], &[4.0, 5.0]).unwrap().std_error.is_some());
    }

    fn five_obs() -> Dataset {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 2.0, 1.0, 3.0, -1.0, 4.0, 2.0, 5.0, 0.5]);
        let y = v(&[1.0, 3.0, 2.0, 6.0, 4.0]);
        center(&x, &y).unwrap()
    }

    #[test]
    fn rrss_identity_and_hand_example() {
        let d = five_obs();
        let s = Support::range(0, 2);
        let wr = v(&[0.5, 0.5]);
        assert_eq!(rrss(&d, &s, &wr, &wr).unwrap(), 1.0);
        let cand = v(&[0.8, 1.0]);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..5 {
            let (a, b, y) = (d.x()[(i, 0)], d.x()[(i, 1)], d.y()[i]);
            num += (y - 0.5 * a - 0.5 * b).powi(2);
            den += (y - 0.8 * a - 1.0 * b).powi(2);
        }
        assert!((rrss(&d, &s, &wr, &cand).unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn rrss_interpolating_candidate_is_error() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = center(&x, &v(&[2.0, 4.0, 6.0])).unwrap();
        let s = Support::new(vec![0]);
        assert!(matches!(rrss(&d, &s, &v(&[1.0]), &v(&[2.0])), Err(Error::ZeroDenominator(_))));
        assert!(rrss(&d, &Support::empty(), &v(&[]), &v(&[])).is_err());
    }
}
