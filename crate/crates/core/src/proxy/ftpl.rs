//! Proxy learned as the average of least-squares best responses to a
//! Follow-the-Perturbed-Leader auditor, plus the explicit function-class
//! variant and the statistical-parity relabeling.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::auditor::{GroupProblem, Oracle, OracleKind};
use super::model::{average_coefficients, AuditorChoice, ProxyComponent, RoundRecord, Theory, TrainingLog};
use crate::data::{Dataset, Population};
use crate::error::{Error, Result};
use crate::learners::regression::GramSolver;
use crate::learners::{affine_scores, ThresholdClassifier};
use crate::rng;

/// Largest explicit labeling family accepted.
pub const MAX_RULES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FtplConfig {
    pub alpha_target: f64,
    pub delta: f64,
    /// Upper bound M on proxy values.
    pub bound: f64,
    pub rounds_override: Option<usize>,
    pub draws_override: Option<usize>,
    /// Largest executed rounds x draws.
    pub budget: u64,
    pub seed: u64,
    pub oracle: OracleKind,
}

impl Default for FtplConfig {
    fn default() -> Self {
        Self {
            alpha_target: 0.1,
            delta: 0.05,
            bound: 1.0,
            rounds_override: None,
            draws_override: None,
            budget: 200_000,
            seed: 0,
            oracle: OracleKind::Prc,
        }
    }
}

/// `C = C0 = M^2 (1 + nM) / (2 alpha S) + 1`.
pub fn ftpl_dual_bound(n: usize, bound: f64, alpha: f64, group_total: f64) -> f64 {
    bound * bound * (1.0 + n as f64 * bound) / (2.0 * alpha * group_total) + 1.0
}

/// Theoretical `(C, C0, T, W)`.
pub fn ftpl_theory(n: usize, groups: usize, bound: f64, alpha: f64, delta: f64, s: f64) -> (f64, f64, f64, f64) {
    let nf = n as f64;
    let c = ftpl_dual_bound(n, bound, alpha, s);
    let c0 = c;
    let one_nm = 1.0 + nf * bound;
    let t = (2.0 * one_nm * (nf.powf(1.5) * c * bound + c0 * nf * bound / s) / (alpha * s))
        .sqrt()
        .ceil();
    let w = (one_nm * one_nm * nf * nf * c * c * bound * bound * (t * groups as f64 / (2.0 * delta)).ln()
        / (alpha * s).powi(2))
    .ceil();
    (c, c0, t, w)
}

/// Learning rates `eta = sqrt(1/(nT)) / (C M)` and `eta' = S sqrt(1/T) / (C0 n M)`.
pub fn ftpl_rates(n: usize, rounds: usize, bound: f64, c: f64, c0: f64, s: f64) -> (f64, f64) {
    let nf = n as f64;
    let tf = rounds as f64;
    (
        (1.0 / (nf * tf)).sqrt() / (c * bound),
        s / (c0 * nf * bound) * (1.0 / tf).sqrt(),
    )
}

/// Dual mass on classifiers, merged by identical coefficients.
#[derive(Debug, Clone, Default)]
struct ClassifierDuals {
    entries: Vec<(usize, ThresholdClassifier, f64)>,
}

impl ClassifierDuals {
    fn add(&mut self, task: usize, h: &ThresholdClassifier, value: f64) {
        match self.entries.iter_mut().find(|(t, c, _)| *t == task && c == h) {
            Some(e) => e.2 += value,
            None => self.entries.push((task, h.clone(), value)),
        }
    }

    fn l1(&self) -> f64 {
        self.entries.iter().map(|e| e.2.abs()).sum()
    }
}

/// Shared loop; the label columns of `pop` are the audited labelings.
fn ftpl_core(pop: &impl Population, k: usize, config: &FtplConfig) -> Result<ProxyComponent> {
    for (v, name) in [(config.alpha_target, "alpha_target"), (config.bound, "M")] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositiveInput(name));
        }
    }
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::NonPositiveInput("delta"));
    }
    let problem = GroupProblem::new(pop, k)?;
    let oracle = Oracle::new(config.oracle, problem.features)?;
    let n = problem.n();
    let nf = n as f64;
    let s = problem.group_total;
    let m_bound = config.bound;
    let (c, c0, theory_t, theory_w) = ftpl_theory(n, pop.n_groups(), m_bound, config.alpha_target, config.delta, s);
    let to_count = |v: f64| if v < u64::MAX as f64 { v as u64 } else { u64::MAX };
    let rounds = config.rounds_override.map_or(to_count(theory_t), |r| r as u64);
    let draws = config.draws_override.map_or(to_count(theory_w), |w| w as u64);
    if rounds == 0 || draws == 0 {
        return Err(Error::NonPositiveInput("rounds and draws"));
    }
    let required = rounds as f64 * draws as f64;
    if required > config.budget as f64 {
        return Err(Error::ConfigOverflow {
            required,
            budget: config.budget,
        });
    }
    let (rounds, draws) = (rounds as usize, draws as usize);
    let (eta, eta_ratio) = ftpl_rates(n, rounds, m_bound, c, c0, s);

    let solver = GramSolver::new(problem.features, Some(pop.mass()))?;
    let tasks = problem.labels.len();
    let dim = problem.dim();
    let mut theta = vec![0.0; dim];
    let mut cum_costs = vec![vec![0.0; n]; tasks];
    let mut cum_offset = vec![0.0; tasks];
    let mut iterates = Vec::with_capacity(rounds);
    let mut log = TrainingLog {
        theory: Some(Theory {
            c,
            c0,
            rounds: theory_t,
            draws: Some(theory_w),
            eta,
            eta_ratio: Some(eta_ratio),
        }),
        ..TrainingLog::default()
    };

    for t in 1..=rounds {
        let zhat = affine_scores(problem.features, &theta);
        for j in 0..tasks {
            for (acc, v) in cum_costs[j].iter_mut().zip(problem.label_one_costs(&zhat, j)) {
                *acc += v;
            }
            cum_offset[j] += problem.error_offset(&zhat, j);
        }
        let ratio = problem.ratio_violation(&zhat);

        // Auditor: W perturbed leaders over (classifier, task, sign).
        let mut duals = ClassifierDuals::default();
        let mut shift = vec![0.0; n];
        let mut strongest: Option<(f64, usize, ThresholdClassifier)> = None;
        for w in 0..draws {
            let mut draw_rng = rng::stream(config.seed, &[k as u64, t as u64, w as u64]);
            let noise: Vec<f64> = (0..n).map(|_| draw_rng.random::<f64>() / eta).collect();
            let mut best: Option<(f64, usize, ThresholdClassifier)> = None;
            for j in 0..tasks {
                for sign in [1.0, -1.0] {
                    let cost1: Vec<f64> = cum_costs[j].iter().zip(&noise).map(|(c, xi)| -sign * c + xi).collect();
                    let h = oracle.minimize(problem.features, &cost1)?;
                    let pred = h.predict(problem.features)?;
                    let objective: f64 =
                        cost1.iter().zip(&pred).map(|(c, &p)| c * f64::from(p)).sum::<f64>() - sign * cum_offset[j];
                    if best.as_ref().is_none_or(|b| objective < b.0) {
                        best = Some((objective, j, h));
                    }
                }
            }
            let (_, j, h) = best.expect("at least one task");
            let pred = h.predict(problem.features)?;
            let current = problem.error_violation(&zhat, &pred, j);
            let lambda = if current > 0.0 { c } else { -c } / draws as f64;
            let y = problem.labels[j];
            for i in 0..n {
                if pred[i] != y[i] {
                    shift[i] += lambda;
                }
            }
            duals.add(j, &h, lambda);
            if strongest.as_ref().is_none_or(|s| current.abs() > s.0.abs()) {
                strongest = Some((current, j, h));
            }
        }
        // Mean of C0 (2 Bern(p) - 1); p vanishes once the ratio is met.
        let p = if ratio < 0.0 {
            (-eta_ratio * ratio).min(1.0)
        } else {
            0.0
        };
        let lambda0 = c0 * (2.0 * p - 1.0);
        debug_assert!(lambda0.abs() <= c0 && duals.l1() <= c * (1.0 + 1e-12));

        // Learner: weighted least squares on the Lagrangian's completed square.
        let targets: Vec<f64> = (0..n)
            .map(|i| problem.z[i] - 0.5 * nf * lambda0 / s + 0.5 * nf * shift[i])
            .collect();
        theta = solver.solve(&targets)?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                round: t,
                loss: f64::NAN,
            });
        }
        iterates.push(theta.clone());

        let (violation, task, h) = strongest.expect("at least one draw");
        log.rounds.push(RoundRecord {
            round: t,
            ratio_violation: ratio,
            error_violation: violation,
            loss: None,
            task: Some(task),
            ratio_dual: lambda0,
            classifier_dual: duals.l1(),
        });
        log.auditors.push(AuditorChoice { task, classifier: h });
    }
    log.executed_rounds = rounds;
    log.executed_draws = Some(draws);
    log.averaged = true;
    Ok(ProxyComponent {
        group: k,
        coefficients: average_coefficients(&iterates),
        log,
    })
}

pub fn fit_ftpl_component(pop: &impl Population, k: usize, config: &FtplConfig) -> Result<ProxyComponent> {
    ftpl_core(pop, k, config)
}

/// A labeling function over (x, z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LabelRule {
    Constant {
        value: u8,
    },
    /// `1[theta . [x, 1] > 0]`.
    Threshold {
        theta: Vec<f64>,
    },
    /// The sensitive attribute itself.
    Sensitive {
        group: usize,
    },
    Not {
        inner: Box<LabelRule>,
    },
}

impl LabelRule {
    pub fn evaluate(&self, pop: &impl Population) -> Result<Vec<u8>> {
        let n = pop.n_rows();
        match self {
            Self::Constant { value } if *value <= 1 => Ok(vec![*value; n]),
            Self::Constant { value } => Err(Error::NonBinaryLabel {
                row: 0,
                column: "constant rule".into(),
                value: value.to_string(),
            }),
            Self::Threshold { theta } => ThresholdClassifier::new(theta.clone())?.predict(pop.features()),
            Self::Sensitive { group } => {
                if *group >= pop.n_groups() {
                    return Err(Error::DimensionMismatch {
                        expected: pop.n_groups(),
                        got: *group,
                    });
                }
                Ok(pop.sensitive(*group).to_vec())
            }
            Self::Not { inner } => Ok(inner.evaluate(pop)?.into_iter().map(|v| 1 - v).collect()),
        }
    }
}

/// A population whose label columns are replaced.
struct Relabeled<'a, P> {
    inner: &'a P,
    labels: Vec<Vec<u8>>,
}

impl<P: Population> Population for Relabeled<'_, P> {
    fn features(&self) -> &DMatrix<f64> {
        self.inner.features()
    }
    fn mass(&self) -> &[f64] {
        self.inner.mass()
    }
    fn sensitive(&self, k: usize) -> &[u8] {
        self.inner.sensitive(k)
    }
    fn label(&self, j: usize) -> &[u8] {
        &self.labels[j]
    }
    fn n_groups(&self) -> usize {
        self.inner.n_groups()
    }
    fn n_tasks(&self) -> usize {
        self.labels.len()
    }
}

/// The FTPL loop audited over `h XOR f` for every `f` in an explicit family:
/// each rule's labeling becomes one audited label column.
pub fn fit_function_class_component(
    pop: &impl Population,
    k: usize,
    rules: &[LabelRule],
    config: &FtplConfig,
) -> Result<ProxyComponent> {
    if rules.is_empty() {
        return Err(Error::EmptyInput("labeling family"));
    }
    if rules.len() > MAX_RULES {
        return Err(Error::FTooLarge(rules.len()));
    }
    let labels = rules.iter().map(|r| r.evaluate(pop)).collect::<Result<Vec<_>>>()?;
    ftpl_core(&Relabeled { inner: pop, labels }, k, config)
}

/// Replaces every label column by one all-zero column, so the error region
/// of h is `{h = 1}`.
pub fn statistical_parity_mode(dataset: &Dataset) -> Result<Dataset> {
    dataset.with_labels(vec![vec![0; dataset.n_rows()]], vec!["dummy".into()])
}
