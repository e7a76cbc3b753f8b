//! The practical proxy learner: a penalized loss re-targeted every round at
//! the auditor's current classifier and minimized by first-order steps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::auditor::{auditor_step, GroupProblem, Oracle, OracleKind};
use super::model::{average_coefficients, AuditorChoice, ProxyComponent, RoundRecord, TrainingLog};
use crate::data::Population;
use crate::error::{Error, Result};
use crate::learners::{affine_scores, ThresholdClassifier};
use crate::rng;

/// Loss above which training is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyLoss {
    pub total: f64,
    /// `alpha * sum (z - zhat)^2`.
    pub mse: f64,
    /// `|sum zhat / sum z - 1|`.
    pub ratio: f64,
    /// `|sum (z - zhat) 1[h != y]|`.
    pub error: f64,
}

/// The three-term proxy loss for group `k` against classifier `h` on task `task`.
pub fn proxy_loss(
    pop: &impl Population,
    k: usize,
    zhat: &[f64],
    h: &ThresholdClassifier,
    task: usize,
    alpha_coef: f64,
) -> Result<ProxyLoss> {
    let problem = GroupProblem::new(pop, k)?;
    if zhat.len() != problem.n() {
        return Err(Error::DimensionMismatch {
            expected: problem.n(),
            got: zhat.len(),
        });
    }
    if task >= problem.labels.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.labels.len(),
            got: task,
        });
    }
    let pred = h.predict(pop.features())?;
    Ok(loss_terms(&problem, zhat, &pred, task, alpha_coef))
}

fn loss_terms(problem: &GroupProblem<'_>, zhat: &[f64], pred: &[u8], task: usize, alpha_coef: f64) -> ProxyLoss {
    let sq: f64 = (0..problem.n())
        .map(|i| problem.weights[i] * (problem.z[i] - zhat[i]).powi(2))
        .sum();
    let mse = alpha_coef * sq;
    let ratio = problem.ratio_violation(zhat).abs();
    let error = problem.error_violation(zhat, pred, task).abs();
    ProxyLoss {
        total: mse + ratio + error,
        mse,
        ratio,
        error,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HProxyConfig {
    pub rounds: usize,
    pub step: f64,
    pub alpha_coef: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Return the iterate average instead of the last iterate.
    pub average: bool,
    pub oracle: OracleKind,
}

impl Default for HProxyConfig {
    fn default() -> Self {
        Self {
            rounds: 300,
            step: 0.01,
            alpha_coef: 0.1,
            seed: 0,
            optimizer: Optimizer::Adam,
            average: false,
            oracle: OracleKind::Prc,
        }
    }
}

/// Adam with the usual decays and stabilizer.
#[derive(Debug, Clone)]
pub struct Adam {
    step: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(dim: usize, step: f64) -> Self {
        Self {
            step,
            first: vec![0.0; dim],
            second: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn update(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..theta.len() {
            self.first[i] = Self::BETA1 * self.first[i] + (1.0 - Self::BETA1) * grad[i];
            self.second[i] = Self::BETA2 * self.second[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m = self.first[i] / c1;
            let v = self.second[i] / c2;
            theta[i] -= self.step * m / (v.sqrt() + Self::EPS);
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Subgradient of the proxy loss in the linear coefficients.
fn loss_gradient(problem: &GroupProblem<'_>, zhat: &[f64], pred: &[u8], task: usize, alpha_coef: f64) -> Vec<f64> {
    let d = problem.features.ncols();
    let ratio_sign = sign(problem.ratio_violation(zhat));
    let error_sign = sign(problem.error_violation(zhat, pred, task));
    let y = problem.labels[task];
    let mut grad = vec![0.0; d + 1];
    for i in 0..problem.n() {
        let w = problem.weights[i];
        let err = f64::from(u8::from(pred[i] != y[i]));
        // d/dzhat_i of each term.
        let coef =
            w * (-2.0 * alpha_coef * (problem.z[i] - zhat[i]) + ratio_sign / problem.group_total - error_sign * err);
        if coef != 0.0 {
            for (c, g) in grad[..d].iter_mut().enumerate() {
                *g += coef * problem.features[(i, c)];
            }
            grad[d] += coef;
        }
    }
    grad
}

/// Trains the proxy for group `k` with the practical loop.
pub fn fit_h_proxy_component(pop: &impl Population, k: usize, config: &HProxyConfig) -> Result<ProxyComponent> {
    if config.rounds == 0 {
        return Err(Error::NonPositiveInput("rounds"));
    }
    if !(config.step.is_finite() && config.step > 0.0) {
        return Err(Error::NonPositiveInput("step"));
    }
    let problem = GroupProblem::new(pop, k)?;
    let oracle = Oracle::new(config.oracle, problem.features)?;
    let dim = problem.dim();
    let mut init_rng = rng::stream(config.seed, &[k as u64, 0x1417]);
    let bound = 1.0 / ((dim - 1).max(1) as f64).sqrt();
    let mut theta: Vec<f64> = (0..dim).map(|_| init_rng.random_range(-bound..bound)).collect();
    let mut adam = Adam::new(dim, config.step);
    let mut log = TrainingLog::default();
    let mut iterates = Vec::with_capacity(if config.average { config.rounds } else { 0 });
    for round in 0..config.rounds {
        let zhat = affine_scores(problem.features, &theta);
        let step = auditor_step(&problem, &zhat, &oracle)?;
        let pred = step.classifier.predict(problem.features)?;
        let loss = loss_terms(&problem, &zhat, &pred, step.task, config.alpha_coef);
        if !loss.total.is_finite() || loss.total > DIVERGENCE_LIMIT {
            return Err(Error::NonFiniteLoss {
                round,
                loss: loss.total,
            });
        }
        log.rounds.push(RoundRecord {
            round,
            ratio_violation: step.ratio_violation,
            error_violation: step.violation,
            loss: Some(loss.total),
            task: Some(step.task),
            ratio_dual: 0.0,
            classifier_dual: 0.0,
        });
        log.auditors.push(AuditorChoice {
            task: step.task,
            classifier: step.classifier,
        });
        let grad = loss_gradient(&problem, &zhat, &pred, step.task, config.alpha_coef);
        match config.optimizer {
            Optimizer::Adam => adam.update(&mut theta, &grad),
            Optimizer::Sgd => theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= config.step * g),
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { round, loss: f64::NAN });
        }
        if config.average {
            iterates.push(theta.clone());
        }
    }
    log.executed_rounds = config.rounds;
    log.averaged = config.average;
    let coefficients = if config.average {
        average_coefficients(&iterates)
    } else {
        theta
    };
    Ok(ProxyComponent {
        group: k,
        coefficients,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use nalgebra::DMatrix;

    #[test]
    fn loss_vanishes_at_the_truth() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let ds = Dataset::new(x, vec![vec![1, 0, 1, 0]], vec![vec![0, 1, 1, 0]], None).unwrap();
        let h = ThresholdClassifier::new(vec![1.0, -1.5]).unwrap();
        let l = proxy_loss(&ds, 0, &[1.0, 0.0, 1.0, 0.0], &h, 0, 0.1).unwrap();
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn hand_computed_loss() {
        // h errs on the first two rows.
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let h = ThresholdClassifier::new(vec![-1.0, 1.5]).unwrap(); // predicts 1,1,0,0
        let ds = Dataset::new(x, vec![vec![1, 0, 1, 0]], vec![vec![0, 0, 0, 0]], None).unwrap();
        let l = proxy_loss(&ds, 0, &[0.5; 4], &h, 0, 0.1).unwrap();
        assert!((l.mse - 0.1).abs() < 1e-15);
        assert_eq!(l.ratio, 0.0);
        assert_eq!(l.error, 0.0);
        assert!((l.total - 0.1).abs() < 1e-15);
        let l0 = proxy_loss(&ds, 0, &[0.5; 4], &h, 0, 0.0).unwrap();
        assert_eq!(l0.total, 0.0);
    }

    #[test]
    fn adam_first_step_moves_by_the_step_size() {
        let mut theta = vec![1.0, -1.0];
        let mut adam = Adam::new(2, 0.01);
        adam.update(&mut theta, &[3.0, -0.5]);
        assert!((theta[0] - 0.99).abs() < 1e-9);
        assert!((theta[1] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn defaults_follow_the_reference_settings() {
        let c = HProxyConfig::default();
        assert_eq!((c.alpha_coef, c.rounds, c.step), (0.1, 300, 0.01));
        let parsed: HProxyConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(parsed, c);
    }
}
