//! Error-parity reductions over (possibly fractional) groups, randomized
//! ensembles with exact expected statistics, and Pareto frontiers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Population;
use crate::error::{Error, Result};
use crate::fairness::{max_gap, stats_from_predictions, FairnessSpec, GroupWeights, WeightTable};
use crate::learners::{PrcOracle, SoftClassifier, ThresholdClassifier};

/// A uniform-or-weighted mixture of threshold classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<ThresholdClassifier>,
    pub weights: Vec<f64>,
}

impl Ensemble {
    pub fn new(members: Vec<ThresholdClassifier>, weights: Vec<f64>) -> Result<Self> {
        let e = Self { members, weights };
        e.validate()?;
        Ok(e)
    }

    pub fn uniform(members: Vec<ThresholdClassifier>) -> Result<Self> {
        let w = 1.0 / members.len() as f64;
        let weights = vec![w; members.len()];
        Self::new(members, weights)
    }

    pub fn single(member: ThresholdClassifier) -> Self {
        Self {
            members: vec![member],
            weights: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::EmptyInput("ensemble has no members"));
        }
        if self.members.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.members.len(),
                got: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NonFiniteInput("ensemble weights".into()));
        }
        let total = crate::compensated_sum(self.weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Malformed(format!("ensemble weights sum to {total}")));
        }
        let d = self.members[0].dim();
        if self.members.iter().any(|m| m.dim() != d) {
            return Err(Error::Malformed("ensemble members disagree on dimension".into()));
        }
        Ok(())
    }

    /// `(1 - t) self + t other`, realizable by randomizing between the two.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Config(format!("mixture weight {t} outside [0, 1]")));
        }
        let members = self.members.iter().chain(&other.members).cloned().collect();
        let weights = self
            .weights
            .iter()
            .map(|w| w * (1.0 - t))
            .chain(other.weights.iter().map(|w| w * t))
            .collect();
        Self::new(members, weights)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: Self = serde_json::from_str(text)?;
        e.validate()?;
        Ok(e)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl SoftClassifier for Ensemble {
    fn prob_one(&self, features: &DMatrix<f64>) -> Vec<f64> {
        let mut p = vec![0.0; features.nrows()];
        for (h, &w) in self.members.iter().zip(&self.weights) {
            for (pi, hi) in p.iter_mut().zip(h.prob_one(features)) {
                *pi += w * hi;
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionsConfig {
    /// Allowed pairwise gap in group error rates.
    pub gamma: f64,
    pub rounds: usize,
    /// Step size `a t^-b`.
    pub a: f64,
    pub b: f64,
    /// Upper bound on every dual variable.
    pub dual_bound: f64,
    /// Label column used for training.
    pub task: usize,
    pub seed: u64,
}

impl Default for ReductionsConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            rounds: 500,
            a: 5.0,
            b: 0.5,
            dual_bound: 50.0,
            task: 0,
            seed: 0,
        }
    }
}

impl ReductionsConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.rounds == 0 {
            return Err(Error::NonPositiveInput("rounds"));
        }
        for (v, name) in [(self.a, "a"), (self.b, "b"), (self.dual_bound, "dual_bound")] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveInput(name));
            }
        }
        Ok(())
    }
}

/// Result of a reductions run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionsFit {
    pub ensemble: Ensemble,
    /// Final duals, two per group pair `(g, g')` with `g < g'`: the
    /// `r_g - r_g' <= gamma` multiplier, then the reverse.
    pub duals: Vec<f64>,
    pub pairs: Vec<(usize, usize)>,
}

/// Minimizes population error subject to pairwise group error gaps of at
/// most gamma. Groups are the comparison groups of `groups` (the column and
/// its complement when there is one column). The learner best-responds with
/// the paired regression classifier; duals follow projected gradient ascent.
pub fn fit_reductions(
    pop: &impl Population,
    groups: GroupWeights<'_>,
    spec: FairnessSpec,
    config: &ReductionsConfig,
) -> Result<ReductionsFit> {
    if spec != FairnessSpec::EqualizedError {
        return Err(Error::Config("reductions enforce equalized error only".into()));
    }
    config.validate()?;
    if config.task >= pop.n_tasks() {
        return Err(Error::DimensionMismatch {
            expected: pop.n_tasks(),
            got: config.task,
        });
    }
    let table = WeightTable::build(pop, groups)?.comparison_groups();
    let n = pop.n_rows();
    let mass = pop.mass();
    let y = pop.label(config.task);
    let totals: Vec<f64> = table
        .columns
        .iter()
        .enumerate()
        .map(|(g, w)| {
            let s: f64 = w.iter().zip(mass).map(|(w, m)| w * m).sum();
            match (table.binary, s) {
                (true, s) if s <= 0.0 => Err(Error::EmptyGroup(g)),
                (false, s) if s <= crate::fairness::DEGENERATE_PROXY_MASS => {
                    Err(Error::DegenerateProxy { group: g, total: s })
                }
                (_, s) => Ok(s),
            }
        })
        .collect::<Result<_>>()?;
    let n_groups = table.columns.len();
    let pairs: Vec<(usize, usize)> = (0..n_groups)
        .flat_map(|g| (g + 1..n_groups).map(move |h| (g, h)))
        .collect();
    // Per-row share of each group's error rate: mass_i w_ig / S_g.
    let share: Vec<Vec<f64>> = table
        .columns
        .iter()
        .zip(&totals)
        .map(|(w, s)| w.iter().zip(mass).map(|(w, m)| m * w / s).collect())
        .collect();

    let oracle = PrcOracle::new(pop.features())?;
    let mut duals = vec![0.0; 2 * pairs.len()];
    let mut members = Vec::with_capacity(config.rounds);
    let mut cost0 = vec![0.0; n];
    let mut cost1 = vec![0.0; n];
    for t in 1..=config.rounds {
        for i in 0..n {
            let mut c = mass[i];
            for (p, &(g, h)) in pairs.iter().enumerate() {
                let net = duals[2 * p] - duals[2 * p + 1];
                if net != 0.0 {
                    c += net * (share[g][i] - share[h][i]);
                }
            }
            if y[i] == 1 {
                cost0[i] = c;
                cost1[i] = 0.0;
            } else {
                cost0[i] = 0.0;
                cost1[i] = c;
            }
        }
        let h = oracle.classify(&cost0, &cost1)?;
        let pred = h.predict(pop.features())?;
        let rates: Vec<f64> = share
            .iter()
            .map(|s| (0..n).filter(|&i| pred[i] != y[i]).map(|i| s[i]).sum())
            .collect();
        let eta = config.a * (t as f64).powf(-config.b);
        for (p, &(g, h)) in pairs.iter().enumerate() {
            let gap = rates[g] - rates[h];
            duals[2 * p] = (duals[2 * p] + eta * (gap - config.gamma)).clamp(0.0, config.dual_bound);
            duals[2 * p + 1] = (duals[2 * p + 1] + eta * (-gap - config.gamma)).clamp(0.0, config.dual_bound);
        }
        if duals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDual(t));
        }
        members.push(h);
    }
    log::debug!("reductions gamma={} final duals {:?}", config.gamma, duals);
    Ok(ReductionsFit {
        ensemble: Ensemble::uniform(members)?,
        duals,
        pairs,
    })
}

/// The paired regression classifier on plain misclassification costs.
pub fn unconstrained_classifier(pop: &impl Population, task: usize) -> Result<ThresholdClassifier> {
    if task >= pop.n_tasks() {
        return Err(Error::DimensionMismatch {
            expected: pop.n_tasks(),
            got: task,
        });
    }
    let y = pop.label(task);
    let cost0: Vec<f64> = pop
        .mass()
        .iter()
        .zip(y)
        .map(|(m, &y)| if y == 1 { *m } else { 0.0 })
        .collect();
    let cost1: Vec<f64> = pop
        .mass()
        .iter()
        .zip(y)
        .map(|(m, &y)| if y == 1 { 0.0 } else { *m })
        .collect();
    PrcOracle::new(pop.features())?.classify(&cost0, &cost1)
}

/// Expected misclassification rate of a randomized classifier.
pub fn expected_error(pop: &impl Population, h: &dyn SoftClassifier, task: usize) -> Result<f64> {
    if task >= pop.n_tasks() {
        return Err(Error::DimensionMismatch {
            expected: pop.n_tasks(),
            got: task,
        });
    }
    let p = h.prob_one(pop.features());
    let y = pop.label(task);
    Ok(pop
        .mass()
        .iter()
        .zip(p.iter().zip(y))
        .map(|(m, (&p, &y))| m * if y == 1 { 1.0 - p } else { p })
        .sum())
}

/// Expected error and expected disparity (largest pairwise rate gap).
pub fn expected_stats(
    ensemble: &Ensemble,
    pop: &impl Population,
    spec: FairnessSpec,
    task: usize,
    weights: GroupWeights<'_>,
) -> Result<(f64, f64)> {
    let error = expected_error(pop, ensemble, task)?;
    let table = WeightTable::build(pop, weights)?.comparison_groups();
    let stats = stats_from_predictions(pop, &ensemble.prob_one(pop.features()), spec, task, &table)?;
    Ok((error, max_gap(&stats.rates())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Test => "test",
        }
    }
}

/// One (proxy kind, gamma, split) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub kind: String,
    pub gamma: f64,
    pub split: Split,
    pub error: f64,
    /// Against the true sensitive columns.
    pub disparity_true: f64,
    /// Against the groups the model was trained on.
    pub disparity_proxy: f64,
}

fn dominates(a: &TradeoffPoint, b: &TradeoffPoint) -> bool {
    a.error <= b.error
        && a.disparity_true <= b.disparity_true
        && (a.error < b.error || a.disparity_true < b.disparity_true)
}

/// Non-dominated points in (error, true disparity), sorted by error
/// ascending (hence disparity descending). Adjacent points are joined by
/// mixture segments. Exact duplicates keep their first occurrence.
pub fn pareto_frontier(points: &[TradeoffPoint]) -> Result<Vec<TradeoffPoint>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("no tradeoff points"));
    }
    let mut front: Vec<TradeoffPoint> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let dominated = points.iter().any(|q| dominates(q, p));
        let duplicate = points[..i]
            .iter()
            .any(|q| q.error == p.error && q.disparity_true == p.disparity_true);
        if !dominated && !duplicate {
            front.push(p.clone());
        }
    }
    front.sort_by(|a, b| a.error.total_cmp(&b.error));
    Ok(front)
}
