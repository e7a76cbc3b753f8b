//! The auditor side of the proxy game: constraint values and the search for
//! the classifier whose error region the proxy misrepresents most.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Population;
use crate::error::{Error, Result};
use crate::learners::{exhaustive_1d_csc, CscInstance, PrcOracle, ThresholdClassifier};

/// One group's training problem. Sums over rows are mass-weighted and scaled
/// by n, so a uniform-mass dataset reproduces plain sums over samples.
#[derive(Debug, Clone)]
pub struct GroupProblem<'a> {
    pub features: &'a DMatrix<f64>,
    pub z: Vec<f64>,
    /// `n * mass_i`.
    pub weights: Vec<f64>,
    pub labels: Vec<&'a [u8]>,
    /// `sum_i w_i z_i`.
    pub group_total: f64,
}

impl<'a> GroupProblem<'a> {
    pub fn new<P: Population>(pop: &'a P, k: usize) -> Result<Self> {
        if k >= pop.n_groups() {
            return Err(Error::DimensionMismatch {
                expected: pop.n_groups(),
                got: k,
            });
        }
        let n = pop.n_rows() as f64;
        let weights: Vec<f64> = pop.mass().iter().map(|m| m * n).collect();
        let z: Vec<f64> = pop.sensitive(k).iter().map(|&v| f64::from(v)).collect();
        let group_total: f64 = weights.iter().zip(&z).map(|(w, z)| w * z).sum();
        if group_total <= 0.0 {
            return Err(Error::EmptyGroup(k));
        }
        let labels = (0..pop.n_tasks()).map(|j| pop.label(j)).collect();
        Ok(Self {
            features: pop.features(),
            z,
            weights,
            labels,
            group_total,
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols() + 1
    }

    /// `sum(w zhat) / sum(w z) - 1`.
    pub fn ratio_violation(&self, zhat: &[f64]) -> f64 {
        let s: f64 = self.weights.iter().zip(zhat).map(|(w, v)| w * v).sum();
        s / self.group_total - 1.0
    }

    /// Per-row cost of predicting 1: `w (z - zhat)(1 - 2y)`.
    pub fn label_one_costs(&self, zhat: &[f64], task: usize) -> Vec<f64> {
        let y = self.labels[task];
        (0..self.n())
            .map(|i| self.weights[i] * (self.z[i] - zhat[i]) * (1.0 - 2.0 * f64::from(y[i])))
            .collect()
    }

    /// The part of the error-region constraint that does not depend on h:
    /// `sum w (z - zhat) y`.
    pub fn error_offset(&self, zhat: &[f64], task: usize) -> f64 {
        let y = self.labels[task];
        (0..self.n())
            .map(|i| self.weights[i] * (self.z[i] - zhat[i]) * f64::from(y[i]))
            .sum()
    }

    /// `sum w (z - zhat) 1[h != y]` for predictions `pred`.
    pub fn error_violation(&self, zhat: &[f64], pred: &[u8], task: usize) -> f64 {
        let y = self.labels[task];
        (0..self.n())
            .filter(|&i| pred[i] != y[i])
            .map(|i| self.weights[i] * (self.z[i] - zhat[i]))
            .sum()
    }
}

/// Cost-sensitive oracle used by the auditor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Paired regression classifier.
    #[default]
    Prc,
    /// Exact search over 1-D thresholds; needs one feature.
    Exhaustive,
}

#[derive(Debug, Clone)]
pub enum Oracle {
    Prc(PrcOracle),
    Exhaustive,
}

impl Oracle {
    pub fn new(kind: OracleKind, features: &DMatrix<f64>) -> Result<Self> {
        match kind {
            OracleKind::Prc => Ok(Self::Prc(PrcOracle::new(features)?)),
            OracleKind::Exhaustive => {
                if features.ncols() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: features.ncols(),
                    });
                }
                Ok(Self::Exhaustive)
            }
        }
    }

    /// Approximate (or exact) minimizer of `sum_i cost1_i h(x_i)`.
    pub fn minimize(&self, features: &DMatrix<f64>, cost1: &[f64]) -> Result<ThresholdClassifier> {
        match self {
            Self::Prc(prc) => prc.classify_label_one(cost1),
            Self::Exhaustive => exhaustive_1d_csc(&CscInstance::label_one_costs(features, cost1.to_vec())?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

/// Keeps the positive-direction candidate when its violation is strictly
/// larger, else the negative one. `v_minus` is already negated.
pub fn select_violator(v_plus: f64, v_minus: f64) -> Sign {
    if v_plus > v_minus {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Ratio,
    ErrorRegion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditorStep {
    pub classifier: ThresholdClassifier,
    pub task: usize,
    pub sign: Sign,
    /// Signed `sum w (z - zhat) 1[h != y]`.
    pub violation: f64,
    /// `sum(w zhat)/sum(w z) - 1`.
    pub ratio_violation: f64,
    /// Which constraint has the larger magnitude.
    pub dominant: Constraint,
}

/// For each task, thresholds the cost regression both ways and keeps the
/// candidate with the larger violation; across tasks keeps the largest
/// magnitude (first task on ties).
pub fn auditor_step(problem: &GroupProblem<'_>, zhat: &[f64], oracle: &Oracle) -> Result<AuditorStep> {
    if problem.labels.is_empty() {
        return Err(Error::EmptyInput("auditor needs at least one task"));
    }
    let mut best: Option<AuditorStep> = None;
    for task in 0..problem.labels.len() {
        let c = problem.label_one_costs(zhat, task);
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let h_plus = oracle.minimize(problem.features, &neg)?;
        let h_minus = oracle.minimize(problem.features, &c)?;
        let e_plus = problem.error_violation(zhat, &h_plus.predict(problem.features)?, task);
        let e_minus = problem.error_violation(zhat, &h_minus.predict(problem.features)?, task);
        let (classifier, sign, violation) = match select_violator(e_plus, -e_minus) {
            Sign::Plus => (h_plus, Sign::Plus, e_plus),
            Sign::Minus => (h_minus, Sign::Minus, e_minus),
        };
        if best.as_ref().is_none_or(|b| violation.abs() > b.violation.abs()) {
            best = Some(AuditorStep {
                classifier,
                task,
                sign,
                violation,
                ratio_violation: 0.0,
                dominant: Constraint::ErrorRegion,
            });
        }
    }
    let mut step = best.expect("at least one task");
    step.ratio_violation = problem.ratio_violation(zhat);
    step.dominant = if step.violation.abs() >= step.ratio_violation.abs() {
        Constraint::ErrorRegion
    } else {
        Constraint::Ratio
    };
    Ok(step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::learners::all_1d_thresholds;

    fn fixture() -> Dataset {
        let x = DMatrix::from_column_slice(8, 1, &[-1.0, -0.7, -0.4, -0.1, 0.1, 0.4, 0.7, 1.0]);
        let z = vec![vec![1, 1, 1, 0, 1, 0, 0, 0]];
        let y = vec![vec![0, 1, 0, 0, 1, 1, 0, 1]];
        Dataset::new(x, z, y, None).unwrap()
    }

    #[test]
    fn max_rule() {
        assert_eq!(select_violator(0.4, 0.6), Sign::Minus);
        assert_eq!(select_violator(0.6, 0.4), Sign::Plus);
        assert_eq!(select_violator(0.5, 0.5), Sign::Minus);
    }

    #[test]
    fn exact_proxy_has_no_violation() {
        let ds = fixture();
        let p = GroupProblem::new(&ds, 0).unwrap();
        let oracle = Oracle::new(OracleKind::Prc, ds.features()).unwrap();
        let step = auditor_step(&p, &p.z.clone(), &oracle).unwrap();
        assert_eq!(step.violation, 0.0);
        assert_eq!(step.ratio_violation, 0.0);
    }

    #[test]
    fn heuristic_finds_at_least_half_the_exact_violation() {
        let ds = fixture();
        let p = GroupProblem::new(&ds, 0).unwrap();
        let zhat = vec![0.2; 8];
        let oracle = Oracle::new(OracleKind::Prc, ds.features()).unwrap();
        let step = auditor_step(&p, &zhat, &oracle).unwrap();
        let exact = all_1d_thresholds(ds.features().as_slice())
            .iter()
            .map(|h| p.error_violation(&zhat, &h.predict(ds.features()).unwrap(), 0).abs())
            .fold(0.0, f64::max);
        assert!(exact > 0.0);
        assert!(step.violation.abs() >= 0.5 * exact, "{} vs {exact}", step.violation);
        let exhaustive = Oracle::new(OracleKind::Exhaustive, ds.features()).unwrap();
        let best = auditor_step(&p, &zhat, &exhaustive).unwrap();
        assert!((best.violation.abs() - exact).abs() < 1e-12);
    }

    #[test]
    fn costs_decompose_the_constraint() {
        let ds = fixture();
        let p = GroupProblem::new(&ds, 0).unwrap();
        let zhat: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
        let c = p.label_one_costs(&zhat, 0);
        for h in all_1d_thresholds(ds.features().as_slice()) {
            let pred = h.predict(ds.features()).unwrap();
            let linear: f64 = c.iter().zip(&pred).map(|(c, &p)| c * f64::from(p)).sum();
            let direct = p.error_violation(&zhat, &pred, 0);
            assert!((linear + p.error_offset(&zhat, 0) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_group_is_rejected() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let ds = Dataset::new(x, vec![vec![0, 0]], vec![vec![0, 1]], None).unwrap();
        assert_eq!(GroupProblem::new(&ds, 0).unwrap_err(), Error::EmptyGroup(0));
    }
}
