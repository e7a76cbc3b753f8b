//! Group-conditional rates for the (E1, E2) fairness family, proxy quality
//! and the slack conversion.
//!
//! A group rate is `N_k / D_k` with `N_k = sum_i mass_i w_ik P[E1 and E2]`
//! and `D_k = sum_i mass_i w_ik 1[E2]`, where `w_ik` is either the binary
//! attribute or a (clipped) proxy value.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Population;
use crate::error::{Error, Result};
use crate::learners::{SoftClassifier, ThresholdClassifier};
use crate::proxy::ProxyModel;

/// Proxy mass at or below which a group is degenerate.
pub const DEGENERATE_PROXY_MASS: f64 = 1e-9;

const AUDIT_STREAM: u64 = 0xa0d1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessSpec {
    /// E1 = {h = 1}, E2 = everything.
    StatisticalParity,
    /// E1 = {h != y}, E2 = everything.
    EqualizedError,
    /// E1 = {h = 1}, E2 = {y = 0}.
    EqualFpr,
    /// E1 = {h = 0}, E2 = {y = 1}.
    EqualFnr,
}

impl FairnessSpec {
    pub fn in_conditioning_set(self, y: u8) -> bool {
        match self {
            Self::StatisticalParity | Self::EqualizedError => true,
            Self::EqualFpr => y == 0,
            Self::EqualFnr => y == 1,
        }
    }

    /// Probability of E1 for a row whose prediction is 1 with probability `p_one`.
    pub fn event_probability(self, p_one: f64, y: u8) -> f64 {
        match self {
            Self::StatisticalParity | Self::EqualFpr => p_one,
            Self::EqualFnr => 1.0 - p_one,
            Self::EqualizedError => {
                if y == 1 {
                    1.0 - p_one
                } else {
                    p_one
                }
            }
        }
    }
}

/// How rows are assigned to groups.
#[derive(Debug, Clone, Copy)]
pub enum GroupWeights<'a> {
    /// The binary sensitive columns.
    True,
    /// Clipped proxy predictions.
    Proxy(&'a ProxyModel),
    /// Explicit per-group, per-row weights, used as given.
    Values(&'a [Vec<f64>]),
}

/// Materialized group weights, one column per group.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub columns: Vec<Vec<f64>>,
    pub binary: bool,
}

impl WeightTable {
    pub fn build(pop: &impl Population, weights: GroupWeights<'_>) -> Result<Self> {
        let n = pop.n_rows();
        let columns = match weights {
            GroupWeights::True => {
                return Ok(Self {
                    columns: (0..pop.n_groups())
                        .map(|k| pop.sensitive(k).iter().map(|&z| f64::from(z)).collect())
                        .collect(),
                    binary: true,
                })
            }
            GroupWeights::Proxy(model) => (0..model.n_groups())
                .map(|k| model.predict(pop.features(), k))
                .collect::<Result<Vec<_>>>()?,
            GroupWeights::Values(v) => v.to_vec(),
        };
        for col in &columns {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
            if col.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFiniteInput("group weights".into()));
            }
        }
        Ok(Self { columns, binary: false })
    }

    /// Groups compared by [`disparity`]: the columns themselves, or with a
    /// single column, the pair (complement, column).
    pub fn comparison_groups(&self) -> Self {
        if self.columns.len() != 1 {
            return self.clone();
        }
        let col = &self.columns[0];
        let complement = col.iter().map(|w| (1.0 - w).max(0.0)).collect();
        Self {
            columns: vec![complement, col.clone()],
            binary: self.binary,
        }
    }
}

/// Numerators and denominators per group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub numerators: Vec<f64>,
    pub denominators: Vec<f64>,
}

impl GroupStats {
    pub fn rates(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .zip(&self.denominators)
            .map(|(n, d)| n / d)
            .collect()
    }
}

/// Per-row probability of E1 (zero outside E2) and the E2 indicator.
pub(crate) fn event_columns(
    pop: &impl Population,
    p_one: &[f64],
    spec: FairnessSpec,
    task: usize,
) -> (Vec<f64>, Vec<f64>) {
    let y = pop.label(task);
    let cond: Vec<f64> = y
        .iter()
        .map(|&y| f64::from(u8::from(spec.in_conditioning_set(y))))
        .collect();
    let event = p_one
        .iter()
        .zip(y)
        .zip(&cond)
        .map(|((&p, &y), &c)| c * spec.event_probability(p, y))
        .collect();
    (event, cond)
}

/// Group statistics given precomputed prediction probabilities.
pub fn stats_from_predictions(
    pop: &impl Population,
    p_one: &[f64],
    spec: FairnessSpec,
    task: usize,
    table: &WeightTable,
) -> Result<GroupStats> {
    if task >= pop.n_tasks() {
        return Err(Error::DimensionMismatch {
            expected: pop.n_tasks(),
            got: task,
        });
    }
    let (event, cond) = event_columns(pop, p_one, spec, task);
    let mass = pop.mass();
    let mut numerators = Vec::with_capacity(table.columns.len());
    let mut denominators = Vec::with_capacity(table.columns.len());
    for (k, w) in table.columns.iter().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..mass.len() {
            let mw = mass[i] * w[i];
            num += mw * event[i];
            den += mw * cond[i];
        }
        if table.binary && den <= 0.0 {
            return Err(Error::EmptyGroup(k));
        }
        if !table.binary && den <= DEGENERATE_PROXY_MASS {
            return Err(Error::DegenerateProxy { group: k, total: den });
        }
        numerators.push(num);
        denominators.push(den);
    }
    Ok(GroupStats {
        numerators,
        denominators,
    })
}

pub fn group_stats(
    pop: &impl Population,
    h: &dyn SoftClassifier,
    spec: FairnessSpec,
    task: usize,
    weights: GroupWeights<'_>,
) -> Result<GroupStats> {
    let table = WeightTable::build(pop, weights)?;
    stats_from_predictions(pop, &h.prob_one(pop.features()), spec, task, &table)
}

/// Rate of E1 given E2 within group `k`.
pub fn group_rate(
    pop: &impl Population,
    h: &dyn SoftClassifier,
    spec: FairnessSpec,
    task: usize,
    k: usize,
    weights: GroupWeights<'_>,
) -> Result<f64> {
    let mut table = WeightTable::build(pop, weights)?;
    if k >= table.columns.len() {
        return Err(Error::DimensionMismatch {
            expected: table.columns.len(),
            got: k,
        });
    }
    table.columns = vec![table.columns.swap_remove(k)];
    let stats = stats_from_predictions(pop, &h.prob_one(pop.features()), spec, task, &table).map_err(|e| match e {
        Error::EmptyGroup(_) => Error::EmptyGroup(k),
        Error::DegenerateProxy { total, .. } => Error::DegenerateProxy { group: k, total },
        other => other,
    })?;
    Ok(stats.rates()[0])
}

/// Largest pairwise gap.
pub fn max_gap(rates: &[f64]) -> f64 {
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    if rates.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Largest pairwise gap in group rates. With one sensitive column the
/// groups are its complement and itself.
pub fn disparity(
    pop: &impl Population,
    h: &dyn SoftClassifier,
    spec: FairnessSpec,
    task: usize,
    weights: GroupWeights<'_>,
) -> Result<f64> {
    let table = WeightTable::build(pop, weights)?.comparison_groups();
    let stats = stats_from_predictions(pop, &h.prob_one(pop.features()), spec, task, &table)?;
    Ok(max_gap(&stats.rates()))
}

/// A classifier in the audit set, with the label column it is audited on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub id: String,
    pub classifier: ThresholdClassifier,
    pub task: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRow {
    pub k: usize,
    pub h_id: String,
    pub task_j: usize,
    pub true_rate: f64,
    pub proxy_rate: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaReport {
    pub rows: Vec<ViolationRow>,
    pub alpha: f64,
}

impl AlphaReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = ::csv::Writer::from_writer(out);
        w.write_record(["k", "h_id", "task_j", "true_rate", "proxy_rate", "violation"])?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.h_id.clone(),
                r.task_j.to_string(),
                format!("{:.16e}", r.true_rate),
                format!("{:.16e}", r.proxy_rate),
                format!("{:.16e}", r.violation),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `|true-weighted rate - proxy-weighted rate|` for every group and audit
/// entry; alpha is the maximum.
pub fn measure_alpha(
    pop: &(impl Population + Sync),
    proxy: GroupWeights<'_>,
    audit: &[AuditEntry],
    spec: FairnessSpec,
) -> Result<AlphaReport> {
    if audit.is_empty() {
        return Err(Error::EmptyInput("audit set"));
    }
    let truth = WeightTable::build(pop, GroupWeights::True)?;
    let approx = WeightTable::build(pop, proxy)?;
    if approx.columns.len() != truth.columns.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.columns.len(),
            got: approx.columns.len(),
        });
    }
    let per_entry: Vec<Vec<ViolationRow>> = audit
        .par_iter()
        .map(|entry| {
            let p = entry.classifier.prob_one(pop.features());
            let t = stats_from_predictions(pop, &p, spec, entry.task, &truth)?.rates();
            let q = stats_from_predictions(pop, &p, spec, entry.task, &approx)?.rates();
            Ok(t.iter()
                .zip(&q)
                .enumerate()
                .map(|(k, (&tr, &pr))| ViolationRow {
                    k,
                    h_id: entry.id.clone(),
                    task_j: entry.task,
                    true_rate: tr,
                    proxy_rate: pr,
                    violation: (tr - pr).abs(),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ViolationRow> = per_entry.into_iter().flatten().collect();
    let alpha = rows.iter().map(|r| r.violation).fold(0.0, f64::max);
    Ok(AlphaReport { rows, alpha })
}

/// Additive constraint slack equivalent to a ratio-form alpha:
/// `alpha * group_mass / (1 + n M)`.
pub fn alpha_to_slack(alpha: f64, n: usize, bound: f64, group_mass: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::NonPositiveInput("alpha"));
    }
    if n == 0 {
        return Err(Error::NonPositiveInput("n"));
    }
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::NonPositiveInput("M"));
    }
    if !(group_mass.is_finite() && group_mass > 0.0) {
        return Err(Error::NonPositiveInput("group mass"));
    }
    Ok(alpha * group_mass / (1.0 + n as f64 * bound))
}

/// Random linear thresholds: Gaussian directions, each cut through a
/// uniformly chosen row so both sides are usually populated.
pub fn random_thresholds(features: &DMatrix<f64>, count: usize, seed: u64) -> Vec<ThresholdClassifier> {
    let (n, d) = features.shape();
    if n == 0 {
        return Vec::new();
    }
    let mut rng = crate::rng::stream(seed, &[AUDIT_STREAM]);
    (0..count)
        .map(|_| {
            let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let row = rng.random_range(0..n);
            let cut: f64 = (0..d).map(|c| w[c] * features[(row, c)]).sum();
            let mut theta = w;
            theta.push(-cut);
            ThresholdClassifier { theta }
        })
        .collect()
}

/// Audit set: classifiers picked by the auditor during training, random
/// linear thresholds, and every 1-D threshold when there is one feature.
/// Each classifier is audited on every task.
pub fn build_audit_set(
    features: &DMatrix<f64>,
    tasks: usize,
    trained: Option<&ProxyModel>,
    random_count: usize,
    seed: u64,
) -> Vec<AuditEntry> {
    let mut pool: Vec<(String, ThresholdClassifier)> = Vec::new();
    if let Some(model) = trained {
        for comp in &model.components {
            for (t, choice) in comp.log.auditors.iter().enumerate() {
                if !pool.iter().any(|(_, h)| *h == choice.classifier) {
                    pool.push((format!("auditor-k{}-t{t}", comp.group), choice.classifier.clone()));
                }
            }
        }
    }
    for (i, h) in random_thresholds(features, random_count, seed).into_iter().enumerate() {
        pool.push((format!("random-{i}"), h));
    }
    if features.ncols() == 1 {
        for (i, h) in crate::learners::all_1d_thresholds(features.as_slice())
            .into_iter()
            .enumerate()
        {
            pool.push((format!("grid-{i}"), h));
        }
    }
    pool.into_iter()
        .flat_map(|(id, h)| {
            (0..tasks).map(move |task| AuditEntry {
                id: id.clone(),
                classifier: h.clone(),
                task,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use nalgebra::DMatrix;

    /// Four rows, x = row index; `h` errs exactly on the first and third rows.
    fn fixture() -> (Dataset, ThresholdClassifier) {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let h = ThresholdClassifier::new(vec![1.0, -0.5]).unwrap(); // predicts 0,1,1,1
        let y = vec![1, 1, 0, 1];
        let ds = Dataset::new(x, vec![vec![1, 1, 0, 0]], vec![y], None).unwrap();
        (ds, h)
    }

    #[test]
    fn binary_rate_counts_errors() {
        let (ds, h) = fixture();
        let r = group_rate(&ds, &h, FairnessSpec::EqualizedError, 0, 0, GroupWeights::True).unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn proxy_rate_is_a_weighted_ratio() {
        let (ds, h) = fixture();
        let w = vec![vec![0.5, 0.25, 0.25, 0.0]];
        let r = group_rate(&ds, &h, FairnessSpec::EqualizedError, 0, 0, GroupWeights::Values(&w)).unwrap();
        assert!((r - 0.75).abs() < 1e-15, "{r}");
    }

    #[test]
    fn perfect_classifier_has_zero_error_rate() {
        let (ds, _) = fixture();
        let h = ThresholdClassifier::new(vec![1.0, -1.5]).unwrap(); // 0,0,1,1
        let y = vec![vec![0, 0, 1, 1]];
        let ds = ds.with_labels(y, vec!["y".into()]).unwrap();
        let w = vec![vec![0.3, 0.2, 0.9, 0.1]];
        for weights in [GroupWeights::True, GroupWeights::Values(&w)] {
            assert_eq!(
                group_rate(&ds, &h, FairnessSpec::EqualizedError, 0, 0, weights).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn empty_and_degenerate_groups() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let ds = Dataset::new(x, vec![vec![0, 0]], vec![vec![0, 1]], None).unwrap();
        let h = ThresholdClassifier::constant(1, 1);
        let err = group_rate(&ds, &h, FairnessSpec::EqualizedError, 0, 0, GroupWeights::True).unwrap_err();
        assert_eq!(err, Error::EmptyGroup(0));
        let w = vec![vec![1e-10, 0.0]];
        let err = group_rate(&ds, &h, FairnessSpec::EqualizedError, 0, 0, GroupWeights::Values(&w)).unwrap_err();
        assert!(matches!(err, Error::DegenerateProxy { group: 0, .. }));
    }

    #[test]
    fn max_gap_examples() {
        assert_eq!(max_gap(&[0.3, 0.3]), 0.0);
        assert!((max_gap(&[0.1, 0.4, 0.25]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn conditioning_sets() {
        use FairnessSpec::*;
        assert!(EqualFpr.in_conditioning_set(0) && !EqualFpr.in_conditioning_set(1));
        assert!(EqualFnr.in_conditioning_set(1) && !EqualFnr.in_conditioning_set(0));
        assert_eq!(EqualFnr.event_probability(1.0, 1), 0.0);
        assert_eq!(StatisticalParity.event_probability(1.0, 0), 1.0);
        assert_eq!(EqualizedError.event_probability(0.0, 1), 1.0);
    }

    #[test]
    fn identity_proxy_has_zero_alpha() {
        let (ds, h) = fixture();
        let w = vec![vec![1.0, 1.0, 0.0, 0.0]];
        let audit = vec![AuditEntry {
            id: "h".into(),
            classifier: h,
            task: 0,
        }];
        let report = measure_alpha(&ds, GroupWeights::Values(&w), &audit, FairnessSpec::EqualizedError).unwrap();
        assert_eq!(report.alpha, 0.0);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,h_id,task_j,true_rate,proxy_rate,violation\n"));
        assert!(measure_alpha(&ds, GroupWeights::Values(&w), &[], FairnessSpec::EqualizedError).is_err());
    }

    #[test]
    fn slack_conversion() {
        let e = alpha_to_slack(0.1, 100, 1.0, 50.0).unwrap();
        assert!((e - 0.1 * 50.0 / 101.0).abs() < 1e-15);
        assert!((e - 0.04950495).abs() < 1e-8);
        assert_eq!(alpha_to_slack(0.0, 100, 1.0, 50.0).unwrap(), 0.0);
        assert_eq!(alpha_to_slack(0.2, 100, 1.0, 50.0).unwrap(), 2.0 * e);
        assert!(alpha_to_slack(0.1, 0, 1.0, 50.0).is_err());
        assert!(alpha_to_slack(0.1, 10, 1.0, 0.0).is_err());
    }
}
