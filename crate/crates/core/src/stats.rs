//! Small estimation helpers: order-stable sums, means with standard errors,
//! and delta-method ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how work was scheduled to produce it.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Ok(MeanEstimate { mean, std_err: (var / n as f64).sqrt(), n })
    }

    pub fn exact(value: f64) -> Self {
        MeanEstimate { mean: value, std_err: 0.0, n: 1 }
    }

    pub fn half_width(&self, z: f64) -> f64 {
        z * self.std_err
    }

    pub fn lower(&self, z: f64) -> f64 {
        self.mean - z * self.std_err
    }

    pub fn upper(&self, z: f64) -> f64 {
        self.mean + z * self.std_err
    }
}

/// Ratio of two means estimated from paired samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub std_err: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub n: usize,
}

impl RatioEstimate {
    /// `mean(num) / mean(den)` with a first-order delta-method standard error.
    ///
    /// Fails when the denominator mean is within `z_guard` standard errors of zero.
    pub fn from_pairs(num: &[f64], den: &[f64], z_guard: f64) -> Result<Self> {
        if num.is_empty() || num.len() != den.len() {
            return Err(Error::EmptyEnsemble);
        }
        let n = num.len();
        let mn = pairwise_sum(num) / n as f64;
        let md = pairwise_sum(den) / n as f64;
        let den_est = MeanEstimate::from_samples(den)?;
        if md <= 0.0 || md <= z_guard * den_est.std_err {
            return Err(Error::DegenerateDenominator { mean: md, std_err: den_est.std_err });
        }
        let r = mn / md;
        // residuals of the linearization: num - r*den
        let resid: Vec<f64> = num.iter().zip(den).map(|(a, b)| a - r * b).collect();
        let rm = pairwise_sum(&resid) / n as f64;
        let sq: Vec<f64> = resid.iter().map(|e| (e - rm) * (e - rm)).collect();
        let var = if n > 1 { pairwise_sum(&sq) / (n - 1) as f64 } else { 0.0 };
        let std_err = (var / n as f64).sqrt() / md;
        Ok(RatioEstimate { ratio: r, std_err, numerator: mn, denominator: md, n })
    }

    pub fn lower(&self, z: f64) -> f64 {
        self.ratio - z * self.std_err
    }

    pub fn upper(&self, z: f64) -> f64 {
        self.ratio + z * self.std_err
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 45.0);
        let big: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&big), 499_500.0);
    }

    #[test]
    fn mean_and_stderr() {
        let m = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((m.std_err - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(MeanEstimate::from_samples(&[]).is_err());
    }

    #[test]
    fn proportional_ratio_has_zero_error() {
        let den = [1.0, 1.2, 0.9, 1.1];
        let num: Vec<f64> = den.iter().map(|d| 0.4 * d).collect();
        let r = RatioEstimate::from_pairs(&num, &den, 3.0).unwrap();
        assert!((r.ratio - 0.4).abs() < 1e-15);
        assert!(r.std_err < 1e-15);
    }

    #[test]
    fn zero_denominator_is_reported() {
        let err = RatioEstimate::from_pairs(&[1.0, 1.0], &[0.0, 0.0], 3.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateDenominator { .. }));
    }
}
