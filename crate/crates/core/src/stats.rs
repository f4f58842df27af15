//! Monte Carlo summaries with compensated, order-fixed reductions.

use serde::{Deserialize, Serialize};

use crate::quad::KahanAcc;

fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanAcc::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Sample mean and its standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `√(mean x²)` with a delta-method standard error.
pub fn rms_stderr(xs: &[f64]) -> (f64, f64) {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let (m, se) = mean_stderr(&sq);
    let rms = m.sqrt();
    let se = if rms > 0.0 { se / (2.0 * rms) } else { se.sqrt() };
    (rms, se)
}

pub fn variance(xs: &[f64]) -> f64 {
    let (m, _) = mean_stderr(xs);
    sum(xs.iter().map(|x| (x - m).powi(2))) / (xs.len() as f64 - 1.0)
}

/// Sample skewness and excess kurtosis.
pub fn skew_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (m, _) = mean_stderr(xs);
    let m2 = sum(xs.iter().map(|x| (x - m).powi(2))) / n;
    let m3 = sum(xs.iter().map(|x| (x - m).powi(3))) / n;
    let m4 = sum(xs.iter().map(|x| (x - m).powi(4))) / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Estimate with its standard error, compared with a reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub z_score: f64,
}

impl MomentEstimate {
    pub fn new(estimate: f64, stderr: f64, target: f64) -> Self {
        let z_score = if stderr > 0.0 {
            (estimate - target) / stderr
        } else if estimate == target {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            estimate,
            stderr,
            target,
            z_score,
        }
    }

    pub fn of_mean(xs: &[f64], target: f64) -> Self {
        let (m, se) = mean_stderr(xs);
        Self::new(m, se, target)
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.z_score.abs() <= sigmas
    }
}
