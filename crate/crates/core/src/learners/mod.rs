//! Base predictors and cost-sensitive classification oracles.

pub mod csc;
pub mod regression;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csc::{all_1d_thresholds, csc_cost, exhaustive_1d_csc, prc_classify, CscInstance, PrcOracle};
pub use self::regression::{fit_least_squares, fit_logistic, LogisticOptions, RegressionKind, RegressionModel};

/// `theta . [x, 1]` for every row.
pub(crate) fn affine_scores(features: &DMatrix<f64>, theta: &[f64]) -> Vec<f64> {
    let d = features.ncols();
    debug_assert_eq!(theta.len(), d + 1);
    let w = DVector::from_column_slice(&theta[..d]);
    let s = features * w;
    s.iter().map(|v| v + theta[d]).collect()
}

/// Anything that assigns each row a probability of predicting 1.
pub trait SoftClassifier {
    fn prob_one(&self, features: &DMatrix<f64>) -> Vec<f64>;
}

/// `h(x) = 1[theta . [x, 1] > 0]`; points on the boundary get 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdClassifier {
    pub theta: Vec<f64>,
}

impl ThresholdClassifier {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("classifier coefficients".into()));
        }
        Ok(Self { theta })
    }

    /// Predicts 1 on every row when `value` is 1, else 0 on every row.
    pub fn constant(d: usize, value: u8) -> Self {
        let mut theta = vec![0.0; d + 1];
        theta[d] = if value == 1 { 1.0 } else { 0.0 };
        Self { theta }
    }

    pub fn dim(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn predict_row(&self, x: &[f64]) -> u8 {
        let d = self.dim();
        let s: f64 = self.theta[..d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.theta[d];
        u8::from(s > 0.0)
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Result<Vec<u8>> {
        if features.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: features.ncols(),
            });
        }
        Ok(affine_scores(features, &self.theta)
            .into_iter()
            .map(|s| u8::from(s > 0.0))
            .collect())
    }
}

impl SoftClassifier for ThresholdClassifier {
    fn prob_one(&self, features: &DMatrix<f64>) -> Vec<f64> {
        affine_scores(features, &self.theta)
            .into_iter()
            .map(|s| f64::from(u8::from(s > 0.0)))
            .collect()
    }
}
