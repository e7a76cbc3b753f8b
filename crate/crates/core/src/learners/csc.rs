//! Cost-sensitive classification: the paired regression heuristic and an
//! exact one-dimensional oracle.

use nalgebra::DMatrix;

use super::regression::GramSolver;
use super::ThresholdClassifier;
use crate::error::{Error, Result};

/// Per-row costs of predicting 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CscInstance<'a> {
    pub features: &'a DMatrix<f64>,
    pub cost0: Vec<f64>,
    pub cost1: Vec<f64>,
}

impl<'a> CscInstance<'a> {
    pub fn new(features: &'a DMatrix<f64>, cost0: Vec<f64>, cost1: Vec<f64>) -> Result<Self> {
        let n = features.nrows();
        for c in [&cost0, &cost1] {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput("classification costs".into()));
            }
        }
        Ok(Self { features, cost0, cost1 })
    }

    /// Instance with `cost0 = 0`.
    pub fn label_one_costs(features: &'a DMatrix<f64>, cost1: Vec<f64>) -> Result<Self> {
        let n = features.nrows();
        Self::new(features, vec![0.0; n], cost1)
    }
}

/// Total cost of `h` on `instance`.
pub fn csc_cost(instance: &CscInstance<'_>, h: &ThresholdClassifier) -> Result<f64> {
    let pred = h.predict(instance.features)?;
    Ok(pred
        .iter()
        .zip(instance.cost0.iter().zip(&instance.cost1))
        .map(|(&p, (&c0, &c1))| if p == 1 { c1 } else { c0 })
        .sum())
}

/// Paired regression classifier with the Gram matrix factored once, so
/// repeated calls on the same features only cost one back-substitution.
#[derive(Debug, Clone)]
pub struct PrcOracle {
    solver: GramSolver,
    n: usize,
}

impl PrcOracle {
    pub fn new(features: &DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            solver: GramSolver::new(features, None)?,
            n: features.nrows(),
        })
    }

    /// Regresses each cost column on x and predicts the label whose fitted
    /// cost is strictly smaller; equal fits predict 0.
    ///
    /// Both regressions share one design, so their difference is the
    /// regression of `cost0 - cost1`.
    pub fn classify(&self, cost0: &[f64], cost1: &[f64]) -> Result<ThresholdClassifier> {
        if cost0.len() != self.n || cost1.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: cost0.len().min(cost1.len()),
            });
        }
        let diff: Vec<f64> = cost0.iter().zip(cost1).map(|(a, b)| a - b).collect();
        ThresholdClassifier::new(self.solver.solve(&diff)?)
    }

    /// Same as [`classify`](Self::classify) with `cost0 = 0`.
    pub fn classify_label_one(&self, cost1: &[f64]) -> Result<ThresholdClassifier> {
        if cost1.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: cost1.len(),
            });
        }
        let neg: Vec<f64> = cost1.iter().map(|c| -c).collect();
        ThresholdClassifier::new(self.solver.solve(&neg)?)
    }
}

/// One-shot paired regression classifier.
pub fn prc_classify(instance: &CscInstance<'_>) -> Result<ThresholdClassifier> {
    PrcOracle::new(instance.features)?.classify(&instance.cost0, &instance.cost1)
}

fn sorted_distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn cut_points(distinct: &[f64]) -> Vec<f64> {
    let u = distinct.len();
    let mut cuts = Vec::with_capacity(u + 1);
    cuts.push(distinct[0] - 1.0);
    for w in distinct.windows(2) {
        cuts.push(w[0] + (w[1] - w[0]) / 2.0);
    }
    cuts.push(distinct[u - 1] + 1.0);
    cuts
}

fn oriented(up: bool, cut: f64) -> ThresholdClassifier {
    if up {
        ThresholdClassifier { theta: vec![1.0, -cut] }
    } else {
        ThresholdClassifier { theta: vec![-1.0, cut] }
    }
}

/// Every distinct labeling of `values` by a 1-D threshold: for each cut
/// below, between or above the sorted distinct values, predict 1 above the
/// cut, then the same cuts predicting 1 below. `2 * (distinct + 1)` entries.
pub fn all_1d_thresholds(values: &[f64]) -> Vec<ThresholdClassifier> {
    if values.is_empty() {
        return Vec::new();
    }
    let cuts = cut_points(&sorted_distinct(values.iter().copied()));
    [true, false]
        .iter()
        .flat_map(|&up| cuts.iter().map(move |&c| oriented(up, c)))
        .collect()
}

/// Exact minimum-cost 1-D threshold classifier; ties go to the first
/// classifier in [`all_1d_thresholds`] order.
pub fn exhaustive_1d_csc(instance: &CscInstance<'_>) -> Result<ThresholdClassifier> {
    let x = instance.features;
    if x.ncols() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: x.ncols(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("cost-sensitive instance has no rows"));
    }
    let distinct = sorted_distinct(x.column(0).iter().copied());
    let u = distinct.len();
    // Per distinct value: summed cost0 and cost1 of its rows.
    let mut c0 = vec![0.0; u];
    let mut c1 = vec![0.0; u];
    for (i, v) in x.column(0).iter().enumerate() {
        let p = distinct.binary_search_by(|d| d.total_cmp(v)).expect("value present");
        c0[p] += instance.cost0[i];
        c1[p] += instance.cost1[i];
    }
    let prefix = |c: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; u + 1];
        for i in 0..u {
            out[i + 1] = out[i] + c[i];
        }
        out
    };
    let (p0, p1) = (prefix(&c0), prefix(&c1));
    let cuts = cut_points(&distinct);
    let mut best = (f64::INFINITY, true, 0usize);
    for up in [true, false] {
        for p in 0..=u {
            let below = |pre: &[f64]| pre[p];
            let above = |pre: &[f64]| pre[u] - pre[p];
            let cost = if up {
                below(&p0) + above(&p1)
            } else {
                below(&p1) + above(&p0)
            };
            if cost < best.0 {
                best = (cost, up, p);
            }
        }
    }
    Ok(oriented(best.1, cuts[best.2]))
}
