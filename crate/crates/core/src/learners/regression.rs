//! Weighted least squares and logistic regression over augmented features `[x, 1]`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::affine_scores;
use crate::error::{Error, Result};

/// Relative pivot below which the Gram matrix is treated as singular.
const PIVOT_RATIO: f64 = 1e-10;
/// Ridge added to a singular Gram matrix, relative to its trace.
pub const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    LeastSquares,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    /// Weights followed by the intercept.
    pub coefficients: Vec<f64>,
    pub kind: RegressionKind,
}

impl RegressionModel {
    pub fn predict(&self, features: &DMatrix<f64>) -> Vec<f64> {
        let s = affine_scores(features, &self.coefficients);
        match self.kind {
            RegressionKind::LeastSquares => s,
            RegressionKind::Logistic => s.into_iter().map(sigmoid).collect(),
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn augment(features: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = features.shape();
    DMatrix::from_fn(n, d + 1, |r, c| if c < d { features[(r, c)] } else { 1.0 })
}

fn check_weights(weights: Option<&[f64]>, n: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFiniteInput("weights must be finite and nonnegative".into()));
        }
    }
    Ok(())
}

/// A factored weighted normal-equation system, reusable across targets.
#[derive(Debug, Clone)]
pub struct GramSolver {
    design: DMatrix<f64>,
    weights: Option<Vec<f64>>,
    factor: Option<Cholesky<f64, Dyn>>,
    ridge: f64,
}

impl GramSolver {
    pub fn new(features: &DMatrix<f64>, weights: Option<&[f64]>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyInput("least squares needs at least one row"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("feature matrix".into()));
        }
        check_weights(weights, features.nrows())?;
        let design = augment(features);
        let weighted = match weights {
            Some(w) => {
                let mut m = design.clone();
                for (r, &wr) in w.iter().enumerate() {
                    m.row_mut(r).scale_mut(wr);
                }
                m
            }
            None => design.clone(),
        };
        let gram = design.transpose() * weighted;
        let trace = gram.trace();
        let max_diag = gram.diagonal().max();
        let well_posed = |g: &DMatrix<f64>| -> Option<Cholesky<f64, Dyn>> {
            let chol = Cholesky::new(g.clone())?;
            let min_pivot = chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v * v)
                .fold(f64::INFINITY, f64::min);
            (min_pivot > PIVOT_RATIO * max_diag).then_some(chol)
        };
        let (factor, ridge) = if trace <= 0.0 {
            (None, 0.0)
        } else if let Some(chol) = well_posed(&gram) {
            (Some(chol), 0.0)
        } else {
            let ridge = RIDGE_JITTER * trace;
            let mut g = gram;
            for i in 0..g.nrows() {
                g[(i, i)] += ridge;
            }
            (Cholesky::new(g), ridge)
        };
        Ok(Self {
            design,
            weights: weights.map(<[f64]>::to_vec),
            factor,
            ridge,
        })
    }

    /// Ridge actually applied (0 when the system was well posed).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Minimizer of `sum_i w_i (theta . x~_i - t_i)^2` (plus the ridge, if any).
    pub fn solve(&self, targets: &[f64]) -> Result<Vec<f64>> {
        let n = self.design.nrows();
        if targets.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: targets.len(),
            });
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("regression targets".into()));
        }
        let Some(factor) = &self.factor else {
            return Ok(vec![0.0; self.design.ncols()]);
        };
        let t = match &self.weights {
            Some(w) => DVector::from_iterator(n, targets.iter().zip(w).map(|(t, w)| t * w)),
            None => DVector::from_column_slice(targets),
        };
        let rhs = self.design.tr_mul(&t);
        Ok(factor.solve(&rhs).iter().copied().collect())
    }
}

/// Weighted least squares via the normal equations.
///
/// A singular Gram matrix receives a ridge of `1e-8 * trace`.
pub fn fit_least_squares(features: &DMatrix<f64>, targets: &[f64], weights: Option<&[f64]>) -> Result<RegressionModel> {
    let coefficients = GramSolver::new(features, weights)?.solve(targets)?;
    Ok(RegressionModel {
        coefficients,
        kind: RegressionKind::LeastSquares,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticOptions {
    pub steps: usize,
    pub step_size: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            steps: 500,
            step_size: 0.1,
        }
    }
}

fn cross_entropy(design: &DMatrix<f64>, labels: &[u8], weights: &[f64], total: f64, theta: &DVector<f64>) -> f64 {
    let s = design * theta;
    s.iter()
        .zip(labels)
        .zip(weights)
        .map(|((&s, &y), &w)| {
            // log(1 + e^s) - y s, computed stably.
            let softplus = if s > 0.0 {
                s + (-s).exp().ln_1p()
            } else {
                s.exp().ln_1p()
            };
            w * (softplus - f64::from(y) * s)
        })
        .sum::<f64>()
        / total
}

/// Gradient descent on weighted mean cross-entropy from a zero start.
///
/// A step that would increase the loss is halved until it does not, so the
/// returned loss never exceeds the initial loss.
pub fn fit_logistic(
    features: &DMatrix<f64>,
    labels: &[u8],
    weights: Option<&[f64]>,
    options: LogisticOptions,
) -> Result<RegressionModel> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("logistic regression needs at least one row"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if let Some(row) = labels.iter().position(|&y| y > 1) {
        return Err(Error::NonBinaryLabel {
            row,
            column: String::new(),
            value: labels[row].to_string(),
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("feature matrix".into()));
    }
    if !(options.step_size.is_finite() && options.step_size > 0.0) {
        return Err(Error::NonPositiveInput("step_size"));
    }
    check_weights(weights, n)?;
    let w: Vec<f64> = weights.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let total: f64 = w.iter().sum();
    let design = augment(features);
    let mut theta = DVector::zeros(design.ncols());
    if total <= 0.0 {
        return Ok(RegressionModel {
            coefficients: theta.iter().copied().collect(),
            kind: RegressionKind::Logistic,
        });
    }
    let mut loss = cross_entropy(&design, labels, &w, total, &theta);
    for _ in 0..options.steps {
        let s = &design * &theta;
        let residual = DVector::from_iterator(
            n,
            s.iter()
                .zip(labels)
                .zip(&w)
                .map(|((&s, &y), &wi)| wi * (sigmoid(s) - f64::from(y)) / total),
        );
        let grad = design.tr_mul(&residual);
        if grad.norm() == 0.0 {
            break;
        }
        let mut step = options.step_size;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &theta - &grad * step;
            let next = cross_entropy(&design, labels, &w, total, &candidate);
            if next <= loss {
                theta = candidate;
                loss = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(RegressionModel {
        coefficients: theta.iter().copied().collect(),
        kind: RegressionKind::Logistic,
    })
}

/// Weighted mean cross-entropy of a logistic model.
pub fn logistic_loss(model: &RegressionModel, features: &DMatrix<f64>, labels: &[u8], weights: Option<&[f64]>) -> f64 {
    let n = features.nrows();
    let w: Vec<f64> = weights.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let total: f64 = w.iter().sum();
    cross_entropy(
        &augment(features),
        labels,
        &w,
        total,
        &DVector::from_column_slice(&model.coefficients),
    )
}
