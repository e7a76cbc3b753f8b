use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{affine_scores, ThresholdClassifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyKind {
    /// Thresholded logistic regression; predictions in {0, 1}.
    BaselineBinary,
    Mse,
    HProxy,
    Ftpl,
    Alg2,
    FunctionClass,
}

impl ProxyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BaselineBinary => "baseline_binary",
            Self::Mse => "mse",
            Self::HProxy => "h_proxy",
            Self::Ftpl => "ftpl",
            Self::Alg2 => "alg2",
            Self::FunctionClass => "function_class",
        }
    }
}

/// Closed-form bounds and step sizes of the game-theoretic learners.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Theory {
    /// Bound on the summed classifier duals.
    pub c: f64,
    /// Bound on the ratio dual.
    pub c0: f64,
    pub rounds: f64,
    #[serde(default)]
    pub draws: Option<f64>,
    pub eta: f64,
    #[serde(default)]
    pub eta_ratio: Option<f64>,
}

/// One training round: constraint violations at the start of the round and
/// the auditor's move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `sum(zhat)/sum(z) - 1`.
    pub ratio_violation: f64,
    /// `sum((z - zhat) 1[h != y])` for the auditor's classifier, signed.
    pub error_violation: f64,
    #[serde(default)]
    pub loss: Option<f64>,
    #[serde(default)]
    pub task: Option<usize>,
    #[serde(default)]
    pub ratio_dual: f64,
    #[serde(default)]
    pub classifier_dual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditorChoice {
    pub task: usize,
    pub classifier: ThresholdClassifier,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    #[serde(default)]
    pub rounds: Vec<RoundRecord>,
    /// Classifiers selected by the auditor, in round order.
    #[serde(default)]
    pub auditors: Vec<AuditorChoice>,
    #[serde(default)]
    pub theory: Option<Theory>,
    #[serde(default)]
    pub executed_rounds: usize,
    #[serde(default)]
    pub executed_draws: Option<usize>,
    /// Whether the coefficients are the iterate average rather than the last iterate.
    #[serde(default)]
    pub averaged: bool,
}

/// The proxy for one sensitive column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyComponent {
    pub group: usize,
    /// Weights followed by the intercept.
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub log: TrainingLog,
}

/// Real-valued predictors `zhat_k : x -> [0, M]`, one per sensitive column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyModel {
    pub kind: ProxyKind,
    /// Clip bound M.
    pub bound: f64,
    pub components: Vec<ProxyComponent>,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl ProxyModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(Error::NonPositiveInput("proxy bound M"));
        }
        if self.components.is_empty() {
            return Err(Error::EmptyInput("proxy has no components"));
        }
        let width = self.components[0].coefficients.len();
        for c in &self.components {
            if c.coefficients.len() != width || width < 2 {
                return Err(Error::Malformed("proxy components disagree on dimension".into()));
            }
            if c.coefficients.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput(format!(
                    "proxy coefficients of group {}",
                    c.group
                )));
            }
        }
        Ok(())
    }

    pub fn n_groups(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].coefficients.len() - 1
    }

    /// Clipped proxy values of component `k` on every row.
    pub fn predict(&self, features: &DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
        let comp = self.components.get(k).ok_or(Error::DimensionMismatch {
            expected: self.components.len(),
            got: k,
        })?;
        if features.ncols() + 1 != comp.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: comp.coefficients.len() - 1,
                got: features.ncols(),
            });
        }
        let s = affine_scores(features, &comp.coefficients);
        Ok(match self.kind {
            ProxyKind::BaselineBinary => s.into_iter().map(|v| f64::from(u8::from(v >= 0.0))).collect(),
            _ => s.into_iter().map(|v| v.clamp(0.0, self.bound)).collect(),
        })
    }

    /// Unclipped linear scores of component `k`.
    pub fn raw_scores(&self, features: &DMatrix<f64>, k: usize) -> Vec<f64> {
        affine_scores(features, &self.components[k].coefficients)
    }
}

/// Uniform average of coefficient vectors.
pub fn average_coefficients(iterates: &[Vec<f64>]) -> Vec<f64> {
    let width = iterates.first().map_or(0, Vec::len);
    let t = iterates.len() as f64;
    (0..width)
        .map(|c| iterates.iter().map(|it| it[c]).sum::<f64>() / t)
        .collect()
}
