//! Linear proxy learned by projected gradient descent against a best-responding auditor.

use serde::{Deserialize, Serialize};

use super::auditor::{auditor_step, GroupProblem, Oracle, OracleKind};
use super::model::{average_coefficients, AuditorChoice, ProxyComponent, RoundRecord, Theory, TrainingLog};
use crate::data::Population;
use crate::error::{Error, Result};
use crate::learners::affine_scores;
use crate::online::project_ball;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Alg2Config {
    pub alpha_target: f64,
    /// Upper bound M on proxy values.
    pub bound: f64,
    /// Bound B on the proxy gradient magnitude; the largest `|x~|` entry when absent.
    pub gradient_bound: Option<f64>,
    /// Radius D of the parameter ball.
    pub radius: f64,
    /// Cap on executed rounds.
    pub max_rounds: usize,
    /// Constraint values at or below this magnitude count as satisfied.
    pub tolerance: f64,
    pub oracle: OracleKind,
    /// Starting coefficients; zero when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for Alg2Config {
    fn default() -> Self {
        Self {
            alpha_target: 0.1,
            bound: 1.0,
            gradient_bound: None,
            radius: 5.0,
            max_rounds: 1000,
            tolerance: 1e-9,
            oracle: OracleKind::Prc,
            init: None,
        }
    }
}

/// `ceil((M^2 (1 + nM) + 2 alpha S / (1 + nM)) / (alpha S))`.
pub fn alg2_dual_bound(n: usize, bound: f64, alpha: f64, group_total: f64) -> f64 {
    let one_nm = 1.0 + n as f64 * bound;
    ((bound * bound * one_nm + 2.0 * alpha * group_total / one_nm) / (alpha * group_total)).ceil()
}

/// `ceil((d D (1 + nM)(2 M B + n C B / S) / (alpha S))^2)`.
#[allow(clippy::too_many_arguments)]
pub fn alg2_rounds(dim: usize, radius: f64, n: usize, bound: f64, grad_bound: f64, c: f64, alpha: f64, s: f64) -> f64 {
    let nf = n as f64;
    let inner =
        dim as f64 * radius * (1.0 + nf * bound) * (2.0 * bound * grad_bound + nf * c * grad_bound / s) / (alpha * s);
    (inner * inner).ceil()
}

fn signum_tol(v: f64, tol: f64) -> f64 {
    if v.abs() <= tol {
        0.0
    } else {
        v.signum()
    }
}

pub fn fit_alg2_component(pop: &impl Population, k: usize, config: &Alg2Config) -> Result<ProxyComponent> {
    for (v, name) in [
        (config.alpha_target, "alpha_target"),
        (config.bound, "M"),
        (config.radius, "D"),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositiveInput(name));
        }
    }
    if config.max_rounds == 0 {
        return Err(Error::NonPositiveInput("max_rounds"));
    }
    let problem = GroupProblem::new(pop, k)?;
    let oracle = Oracle::new(config.oracle, problem.features)?;
    let n = problem.n();
    let dim = problem.dim();
    let s = problem.group_total;
    let grad_bound = config
        .gradient_bound
        .unwrap_or_else(|| problem.features.iter().fold(1.0_f64, |acc, v| acc.max(v.abs())));
    let c = alg2_dual_bound(n, config.bound, config.alpha_target, s);
    let theory_rounds = alg2_rounds(
        dim,
        config.radius,
        n,
        config.bound,
        grad_bound,
        c,
        config.alpha_target,
        s,
    );
    let rounds = if theory_rounds < config.max_rounds as f64 {
        theory_rounds as usize
    } else {
        config.max_rounds
    };
    let mut theta = match &config.init {
        Some(init) if init.len() == dim => init.clone(),
        Some(init) => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: init.len(),
            })
        }
        None => vec![0.0; dim],
    };
    project_ball(&mut theta, config.radius);

    let d = dim - 1;
    let nf = n as f64;
    let mut log = TrainingLog {
        theory: Some(Theory {
            c,
            c0: c,
            rounds: theory_rounds,
            draws: None,
            eta: 1.0,
            eta_ratio: None,
        }),
        ..TrainingLog::default()
    };
    let mut iterates = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        iterates.push(theta.clone());
        let zhat = affine_scores(problem.features, &theta);
        let step = auditor_step(&problem, &zhat, &oracle)?;
        let tol = config.tolerance * (1.0 + s);
        let v = signum_tol(step.violation, tol);
        let r = signum_tol(step.ratio_violation, config.tolerance);
        let (lambda0, lambda_h) = if step.violation.abs() >= step.ratio_violation.abs() {
            (0.0, c * v)
        } else {
            (c * r, 0.0)
        };
        let pred = step.classifier.predict(problem.features)?;
        let y = problem.labels[step.task];
        let mut grad = vec![0.0; dim];
        for i in 0..n {
            let w = problem.weights[i];
            let err = f64::from(u8::from(pred[i] != y[i]));
            let coef = w * (2.0 / nf * (zhat[i] - problem.z[i]) + lambda0 / s - lambda_h * err);
            for (col, g) in grad[..d].iter_mut().enumerate() {
                *g += coef * problem.features[(i, col)];
            }
            grad[d] += coef;
        }
        let eta = 1.0 / (t as f64).sqrt();
        for (th, g) in theta.iter_mut().zip(&grad) {
            *th -= eta * g;
        }
        project_ball(&mut theta, config.radius);
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                round: t,
                loss: f64::NAN,
            });
        }
        log.rounds.push(RoundRecord {
            round: t,
            ratio_violation: step.ratio_violation,
            error_violation: step.violation,
            loss: None,
            task: Some(step.task),
            ratio_dual: lambda0,
            classifier_dual: lambda_h,
        });
        log.auditors.push(AuditorChoice {
            task: step.task,
            classifier: step.classifier,
        });
    }
    log.executed_rounds = rounds;
    log.averaged = true;
    Ok(ProxyComponent {
        group: k,
        coefficients: average_coefficients(&iterates),
        log,
    })
}
