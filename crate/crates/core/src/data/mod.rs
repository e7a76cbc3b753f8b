//! Datasets, ingestion, preprocessing recipes, synthetic generation and splits.

pub mod binning;
pub mod csv;
pub mod synth;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

pub use self::binning::{acs_recipes, apply_binning, Bin, BinningRecipe, ACS_DROPPED_COLUMNS};
pub use self::csv::{load_csv, parse_csv, RawTable, Schema};
pub use self::synth::{synth_cond_independent, FiniteDistribution, LabelModel, SynthSpec};

const SPLIT_STREAM: u64 = 0x5917;

/// Tolerance on the total probability mass of a dataset.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Read-only view shared by empirical samples and exact finite distributions.
///
/// Rows carry a feature vector, a probability mass, K binary sensitive
/// attributes and m binary labels.
pub trait Population {
    fn features(&self) -> &DMatrix<f64>;
    fn mass(&self) -> &[f64];
    fn sensitive(&self, k: usize) -> &[u8];
    fn label(&self, j: usize) -> &[u8];
    fn n_groups(&self) -> usize;
    fn n_tasks(&self) -> usize;

    fn n_rows(&self) -> usize {
        self.mass().len()
    }

    fn n_features(&self) -> usize {
        self.features().ncols()
    }
}

/// An immutable table of features, binary sensitive attributes and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    sensitive: Vec<Vec<u8>>,
    labels: Vec<Vec<u8>>,
    mass: Vec<f64>,
    feature_names: Vec<String>,
    sensitive_names: Vec<String>,
    label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with generated column names.
    ///
    /// `sensitive` and `labels` are column-major (one vector per attribute /
    /// task). `mass` defaults to uniform.
    pub fn new(
        features: DMatrix<f64>,
        sensitive: Vec<Vec<u8>>,
        labels: Vec<Vec<u8>>,
        mass: Option<Vec<f64>>,
    ) -> Result<Self> {
        let d = features.ncols();
        let feature_names = (0..d).map(|c| format!("x{c}")).collect();
        let sensitive_names = (0..sensitive.len()).map(|k| format!("z{k}")).collect();
        let label_names = (0..labels.len()).map(|j| format!("y{j}")).collect();
        Self::with_names(
            features,
            sensitive,
            labels,
            mass,
            feature_names,
            sensitive_names,
            label_names,
        )
    }

    pub fn with_names(
        features: DMatrix<f64>,
        sensitive: Vec<Vec<u8>>,
        labels: Vec<Vec<u8>>,
        mass: Option<Vec<f64>>,
        feature_names: Vec<String>,
        sensitive_names: Vec<String>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::EmptyInput("dataset has no rows"));
        }
        if features.ncols() == 0 {
            return Err(Error::EmptyInput("dataset has no feature columns"));
        }
        if sensitive.is_empty() {
            return Err(Error::EmptyInput("dataset has no sensitive columns"));
        }
        if labels.is_empty() {
            return Err(Error::EmptyInput("dataset has no label columns"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("feature matrix".into()));
        }
        for (k, col) in sensitive.iter().enumerate() {
            check_binary_column(col, n, || sensitive_names.get(k).cloned(), true)?;
        }
        for (j, col) in labels.iter().enumerate() {
            check_binary_column(col, n, || label_names.get(j).cloned(), false)?;
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                got: feature_names.len(),
            });
        }
        if sensitive_names.len() != sensitive.len() {
            return Err(Error::DimensionMismatch {
                expected: sensitive.len(),
                got: sensitive_names.len(),
            });
        }
        if label_names.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: label_names.len(),
            });
        }
        let mass = match mass {
            Some(m) => {
                if m.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.len(),
                    });
                }
                if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::NonFiniteInput("mass must be finite and nonnegative".into()));
                }
                let total = crate::compensated_sum(m.iter().copied());
                if (total - 1.0).abs() > MASS_TOLERANCE {
                    return Err(Error::Malformed(format!("mass sums to {total}, expected 1")));
                }
                m
            }
            None => vec![1.0 / n as f64; n],
        };
        Ok(Self {
            features,
            sensitive,
            labels,
            mass,
            feature_names,
            sensitive_names,
            label_names,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sensitive_names(&self) -> &[String] {
        &self.sensitive_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Replaces every label column, keeping features, groups and mass.
    pub fn with_labels(&self, labels: Vec<Vec<u8>>, names: Vec<String>) -> Result<Self> {
        Self::with_names(
            self.features.clone(),
            self.sensitive.clone(),
            labels,
            Some(self.mass.clone()),
            self.feature_names.clone(),
            self.sensitive_names.clone(),
            names,
        )
    }

    /// Keeps only the listed sensitive columns, in the given order.
    pub fn select_sensitive(&self, keep: &[usize]) -> Result<Self> {
        let mut cols = Vec::with_capacity(keep.len());
        let mut names = Vec::with_capacity(keep.len());
        for &k in keep {
            let col = self.sensitive.get(k).ok_or(Error::DimensionMismatch {
                expected: self.sensitive.len(),
                got: k,
            })?;
            cols.push(col.clone());
            names.push(self.sensitive_names[k].clone());
        }
        Self::with_names(
            self.features.clone(),
            cols,
            self.labels.clone(),
            Some(self.mass.clone()),
            self.feature_names.clone(),
            names,
            self.label_names.clone(),
        )
    }

    /// Restricts to a subset of rows; masses are renormalized to sum to one.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("row selection"));
        }
        let d = self.features.ncols();
        let features = DMatrix::from_fn(rows.len(), d, |r, c| self.features[(rows[r], c)]);
        let pick = |cols: &[Vec<u8>]| -> Vec<Vec<u8>> {
            cols.iter().map(|col| rows.iter().map(|&r| col[r]).collect()).collect()
        };
        let total: f64 = rows.iter().map(|&r| self.mass[r]).sum();
        let mass = if self.is_uniform() {
            vec![1.0 / rows.len() as f64; rows.len()]
        } else if total > 0.0 {
            rows.iter().map(|&r| self.mass[r] / total).collect()
        } else {
            return Err(Error::Malformed("selected rows carry zero mass".into()));
        };
        Self::with_names(
            features,
            pick(&self.sensitive),
            pick(&self.labels),
            Some(mass),
            self.feature_names.clone(),
            self.sensitive_names.clone(),
            self.label_names.clone(),
        )
    }

    fn is_uniform(&self) -> bool {
        let u = 1.0 / self.mass.len() as f64;
        self.mass.iter().all(|&m| m == u)
    }

    /// Seeded random partition into (train, test).
    ///
    /// The train half has `max(1, min(n-1, floor(fraction * n)))` rows; both
    /// halves keep the original relative row order.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Self, Self)> {
        let n = self.n_rows();
        if !(fraction > 0.0 && fraction < 1.0) || n < 2 {
            return Err(Error::DegenerateSplit { n, fraction });
        }
        let n_train = ((fraction * n as f64).floor() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, &[SPLIT_STREAM]));
        let mut train: Vec<usize> = order[..n_train].to_vec();
        let mut test: Vec<usize> = order[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.select_rows(&train)?, self.select_rows(&test)?))
    }

    /// Applies an affine per-column map to the features.
    pub fn map_features(&self, scaler: &Standardizer) -> Result<Self> {
        if scaler.means.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: scaler.means.len(),
            });
        }
        let mut features = self.features.clone();
        for c in 0..features.ncols() {
            for r in 0..features.nrows() {
                features[(r, c)] = (features[(r, c)] - scaler.means[c]) / scaler.scales[c];
            }
        }
        let mut out = self.clone();
        out.features = features;
        Ok(out)
    }
}

fn check_binary_column(col: &[u8], n: usize, name: impl Fn() -> Option<String>, sensitive: bool) -> Result<()> {
    if col.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: col.len(),
        });
    }
    if let Some((row, &v)) = col.iter().enumerate().find(|(_, &v)| v > 1) {
        let column = name().unwrap_or_default();
        let value = v.to_string();
        return Err(if sensitive {
            Error::NonBinarySensitive { row, column, value }
        } else {
            Error::NonBinaryLabel { row, column, value }
        });
    }
    Ok(())
}

impl Population for Dataset {
    fn features(&self) -> &DMatrix<f64> {
        &self.features
    }
    fn mass(&self) -> &[f64] {
        &self.mass
    }
    fn sensitive(&self, k: usize) -> &[u8] {
        &self.sensitive[k]
    }
    fn label(&self, j: usize) -> &[u8] {
        &self.labels[j]
    }
    fn n_groups(&self) -> usize {
        self.sensitive.len()
    }
    fn n_tasks(&self) -> usize {
        self.labels.len()
    }
}

/// Per-column standardization (mean 0, variance 1), fit on one split and
/// applied to others. Constant columns are only centered.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let x = data.features();
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            means.push(mean);
            scales.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { means, scales }
    }
}
