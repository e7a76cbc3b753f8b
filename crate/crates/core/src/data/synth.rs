//! Synthetic populations over a finite feature grid.
//!
//! Sensitive attributes are drawn as `z_k ~ Bernoulli(g_k(x))` and labels as
//! `y_j ~ Bernoulli(p_j(x))`, independently given `x`, so the pair (z, y) is
//! conditionally independent given x unless `z_label_coupling` is set. The
//! grid has at most 64 points, which keeps exact expectations cheap.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Population};
use crate::error::{Error, Result};
use crate::rng;

/// Largest supported feature grid.
pub const MAX_SUPPORT: usize = 64;

const GROUP_FLOOR: f64 = 0.05;
const GROUP_CEIL: f64 = 0.95;
const RESAMPLE_STREAM: u64 = 0x5a3b;

/// How labels depend on the features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LabelModel {
    /// `y = 1[w.x + c > 0]`, a deterministic function of x.
    Threshold,
    /// `P(y = 1 | x) = sigmoid(sharpness * (w.x + c))`.
    Logistic { sharpness: f64 },
}

/// Generator knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Grid levels per axis; defaults to the largest L with L^d <= 64.
    pub levels: Option<usize>,
    /// Affine `g_k` (so the linear proxy class contains E[z|x]) instead of a logistic one.
    pub linear_realizable: bool,
    /// Number of label columns m.
    pub tasks: usize,
    pub label_model: LabelModel,
    /// Probability that label j copies z_0 instead of following p_j(x).
    /// Zero keeps z and y conditionally independent given x.
    pub z_label_coupling: f64,
    /// Explicit group models, K rows of `[w_1..w_d, intercept]`; drawn when absent.
    pub group_coefficients: Option<Vec<Vec<f64>>>,
    /// Explicit label models, m rows of `[w_1..w_d, intercept]`; drawn when absent.
    pub label_coefficients: Option<Vec<Vec<f64>>>,
    /// Unnormalized probabilities of the grid points; uniform when absent.
    pub point_weights: Option<Vec<f64>>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            levels: None,
            linear_realizable: true,
            tasks: 1,
            label_model: LabelModel::Threshold,
            z_label_coupling: 0.0,
            group_coefficients: None,
            label_coefficients: None,
            point_weights: None,
        }
    }
}

/// An exact joint distribution over (x, z, y) with finite support.
///
/// Atoms are the rows of the [`Population`] view: one per (grid point, z
/// pattern, y pattern) with positive probability.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    points: DMatrix<f64>,
    point_prob: Vec<f64>,
    conditional_z: Vec<Vec<f64>>,
    group_coefficients: Vec<Vec<f64>>,
    linear_groups: bool,
    atom_features: DMatrix<f64>,
    atom_prob: Vec<f64>,
    atom_point: Vec<usize>,
    atom_z: Vec<Vec<u8>>,
    atom_y: Vec<Vec<u8>>,
}

impl FiniteDistribution {
    /// Grid points, one per row.
    pub fn support(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point_probabilities(&self) -> &[f64] {
        &self.point_prob
    }

    /// Exact `E[z_k | x]` at every grid point.
    pub fn conditional_z(&self, k: usize) -> &[f64] {
        &self.conditional_z[k]
    }

    /// Exact `E[z_k | x]` evaluated at every atom.
    pub fn conditional_z_at_atoms(&self, k: usize) -> Vec<f64> {
        self.atom_point.iter().map(|&p| self.conditional_z[k][p]).collect()
    }

    /// Grid point index of each atom.
    pub fn atom_points(&self) -> &[usize] {
        &self.atom_point
    }

    /// Coefficients `[w_1..w_d, intercept]` of the group models.
    pub fn group_coefficients(&self) -> &[Vec<f64>] {
        &self.group_coefficients
    }

    /// Whether `E[z_k | x]` is affine in x.
    pub fn linear_groups(&self) -> bool {
        self.linear_groups
    }

    /// An i.i.d. sample of `n` rows drawn from the atom table.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::EmptyInput("n must be at least 1"));
        }
        let mut rng = rng::stream(seed, &[RESAMPLE_STREAM]);
        let mut cdf = Vec::with_capacity(self.atom_prob.len());
        let mut acc = 0.0;
        for p in &self.atom_prob {
            acc += p;
            cdf.push(acc);
        }
        let last = cdf.len() - 1;
        let rows: Vec<usize> = (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                cdf.partition_point(|&c| c <= u).min(last)
            })
            .collect();
        let d = self.atom_features.ncols();
        let features = DMatrix::from_fn(n, d, |r, c| self.atom_features[(rows[r], c)]);
        let pick = |cols: &[Vec<u8>]| cols.iter().map(|col| rows.iter().map(|&r| col[r]).collect()).collect();
        Dataset::new(features, pick(&self.atom_z), pick(&self.atom_y), None)
    }

    /// The atom table as a weighted dataset (mass = atom probability).
    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::new(
            self.atom_features.clone(),
            self.atom_z.clone(),
            self.atom_y.clone(),
            Some(self.atom_prob.clone()),
        )
    }
}

impl Population for FiniteDistribution {
    fn features(&self) -> &DMatrix<f64> {
        &self.atom_features
    }
    fn mass(&self) -> &[f64] {
        &self.atom_prob
    }
    fn sensitive(&self, k: usize) -> &[u8] {
        &self.atom_z[k]
    }
    fn label(&self, j: usize) -> &[u8] {
        &self.atom_y[j]
    }
    fn n_groups(&self) -> usize {
        self.atom_z.len()
    }
    fn n_tasks(&self) -> usize {
        self.atom_y.len()
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn affine(coef: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    coef[..d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + coef[d]
}

fn default_levels(d: usize) -> usize {
    (1..=MAX_SUPPORT)
        .take_while(|l| l.checked_pow(d as u32).is_some_and(|p| p <= MAX_SUPPORT))
        .last()
        .unwrap_or(1)
}

fn grid(d: usize, levels: usize) -> DMatrix<f64> {
    let count = levels.pow(d as u32);
    let level_value = |i: usize| {
        if levels == 1 {
            0.0
        } else {
            -1.0 + 2.0 * i as f64 / (levels - 1) as f64
        }
    };
    DMatrix::from_fn(count, d, |p, axis| {
        let digit = (p / levels.pow(axis as u32)) % levels;
        level_value(digit)
    })
}

/// Samples `n` rows from a conditionally independent synthetic population and
/// returns the exact distribution alongside.
pub fn synth_cond_independent(
    seed: u64,
    n: usize,
    d: usize,
    k_groups: usize,
    spec: &SynthSpec,
) -> Result<(Dataset, FiniteDistribution)> {
    if n == 0 {
        return Err(Error::EmptyInput("n must be at least 1"));
    }
    if d == 0 || k_groups == 0 || spec.tasks == 0 {
        return Err(Error::Config("d, K and the task count must be at least 1".into()));
    }
    if k_groups + spec.tasks > 10 {
        return Err(Error::Config("K + m must not exceed 10 for exact enumeration".into()));
    }
    if !(0.0..=1.0).contains(&spec.z_label_coupling) {
        return Err(Error::Config("z_label_coupling must lie in [0, 1]".into()));
    }
    let levels = spec.levels.unwrap_or_else(|| default_levels(d));
    let support = levels.checked_pow(d as u32).unwrap_or(usize::MAX);
    if levels == 0 || support > MAX_SUPPORT {
        return Err(Error::Config(format!(
            "grid of {levels}^{d} points exceeds {MAX_SUPPORT}"
        )));
    }
    let points = grid(d, levels);
    let mut rng = rng::stream(seed, &[0x5e_ed]);

    let point_prob = match &spec.point_weights {
        Some(w) => {
            if w.len() != support || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config(
                    "point_weights must be nonnegative, one per grid point".into(),
                ));
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(Error::Config("point_weights sum to zero".into()));
            }
            w.iter().map(|v| v / total).collect()
        }
        None => vec![1.0 / support as f64; support],
    };

    let group_coefficients = match &spec.group_coefficients {
        Some(c) => check_coefficients(c, k_groups, d, "group_coefficients")?,
        None => (0..k_groups)
            .map(|_| draw_group_model(&mut rng, d, spec.linear_realizable))
            .collect(),
    };
    let label_coefficients = match &spec.label_coefficients {
        Some(c) => check_coefficients(c, spec.tasks, d, "label_coefficients")?,
        None => {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            (0..spec.tasks)
                .map(|_| {
                    let mut c: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
                    c.push(rng.random_range(-0.3..0.3));
                    c
                })
                .collect()
        }
    };

    let row = |p: usize| -> Vec<f64> { points.row(p).iter().copied().collect() };
    let mut conditional_z = vec![vec![0.0; support]; k_groups];
    let mut label_prob = vec![vec![0.0; support]; spec.tasks];
    for p in 0..support {
        let x = row(p);
        for (k, coef) in group_coefficients.iter().enumerate() {
            let g = if spec.linear_realizable {
                affine(coef, &x)
            } else {
                sigmoid(affine(coef, &x))
            };
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!(
                    "group model {k} leaves [0, 1] at grid point {p}"
                )));
            }
            conditional_z[k][p] = g;
        }
        for (j, coef) in label_coefficients.iter().enumerate() {
            let s = affine(coef, &x);
            label_prob[j][p] = match spec.label_model {
                LabelModel::Threshold => f64::from(u8::from(s > 0.0)),
                LabelModel::Logistic { sharpness } => sigmoid(sharpness * s),
            };
        }
    }

    let coupling = spec.z_label_coupling;
    let label_given = |j: usize, p: usize, z0: u8| (1.0 - coupling) * label_prob[j][p] + coupling * f64::from(z0);

    // Exact atom table.
    let mut atom_rows = Vec::new();
    let mut atom_prob = Vec::new();
    let mut atom_point = Vec::new();
    let mut atom_z = vec![Vec::new(); k_groups];
    let mut atom_y = vec![Vec::new(); spec.tasks];
    for p in 0..support {
        for zmask in 0..(1usize << k_groups) {
            let z: Vec<u8> = (0..k_groups).map(|k| ((zmask >> k) & 1) as u8).collect();
            let pz: f64 = z
                .iter()
                .enumerate()
                .map(|(k, &zk)| {
                    if zk == 1 {
                        conditional_z[k][p]
                    } else {
                        1.0 - conditional_z[k][p]
                    }
                })
                .product();
            for ymask in 0..(1usize << spec.tasks) {
                let y: Vec<u8> = (0..spec.tasks).map(|j| ((ymask >> j) & 1) as u8).collect();
                let py: f64 = y
                    .iter()
                    .enumerate()
                    .map(|(j, &yj)| {
                        let q = label_given(j, p, z[0]);
                        if yj == 1 {
                            q
                        } else {
                            1.0 - q
                        }
                    })
                    .product();
                let prob = point_prob[p] * pz * py;
                if prob > 0.0 {
                    atom_rows.push(p);
                    atom_prob.push(prob);
                    atom_point.push(p);
                    for k in 0..k_groups {
                        atom_z[k].push(z[k]);
                    }
                    for j in 0..spec.tasks {
                        atom_y[j].push(y[j]);
                    }
                }
            }
        }
    }
    let atom_features = DMatrix::from_fn(atom_rows.len(), d, |r, c| points[(atom_rows[r], c)]);

    // Empirical sample.
    let cdf: Vec<f64> = point_prob
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let mut sample_points = Vec::with_capacity(n);
    let mut sens = vec![Vec::with_capacity(n); k_groups];
    let mut labels = vec![Vec::with_capacity(n); spec.tasks];
    for _ in 0..n {
        let u: f64 = rng.random();
        let p = cdf.iter().position(|&c| u < c).unwrap_or(support - 1);
        sample_points.push(p);
        let z: Vec<u8> = (0..k_groups)
            .map(|k| u8::from(rng.random::<f64>() < conditional_z[k][p]))
            .collect();
        for (j, column) in labels.iter_mut().enumerate() {
            let q = label_given(j, p, z[0]);
            column.push(u8::from(rng.random::<f64>() < q));
        }
        for (k, zk) in z.into_iter().enumerate() {
            sens[k].push(zk);
        }
    }
    let features = DMatrix::from_fn(n, d, |r, c| points[(sample_points[r], c)]);
    let dataset = Dataset::new(features, sens, labels, None)?;

    let dist = FiniteDistribution {
        points,
        point_prob,
        conditional_z,
        group_coefficients,
        linear_groups: spec.linear_realizable,
        atom_features,
        atom_prob,
        atom_point,
        atom_z,
        atom_y,
    };
    Ok((dataset, dist))
}

fn check_coefficients(c: &[Vec<f64>], rows: usize, d: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    if c.len() != rows || c.iter().any(|r| r.len() != d + 1 || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Config(format!(
            "{what} must have {rows} rows of {} finite values",
            d + 1
        )));
    }
    Ok(c.to_vec())
}

fn draw_group_model(rng: &mut impl Rng, d: usize, linear: bool) -> Vec<f64> {
    if linear {
        // Keep a + b.x inside [GROUP_FLOOR, GROUP_CEIL] on [-1, 1]^d.
        let a: f64 = rng.random_range(0.3..0.7);
        let budget = (a - GROUP_FLOOR).min(GROUP_CEIL - a);
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l1: f64 = raw.iter().map(|v: &f64| v.abs()).sum::<f64>().max(1e-12);
        let scale = budget * rng.random_range(0.5..1.0) / l1;
        let mut c: Vec<f64> = raw.iter().map(|v| v * scale).collect();
        c.push(a);
        c
    } else {
        let mut c: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        c.push(rng.random_range(-1.0..1.0));
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_levels_fill_the_grid_budget() {
        assert_eq!(default_levels(1), 64);
        assert_eq!(default_levels(2), 8);
        assert_eq!(default_levels(3), 4);
        assert_eq!(default_levels(5), 2);
        assert_eq!(default_levels(7), 1);
    }

    #[test]
    fn same_seed_gives_identical_output() {
        let spec = SynthSpec::default();
        let (a, da) = synth_cond_independent(7, 2000, 2, 2, &spec).unwrap();
        let (b, db) = synth_cond_independent(7, 2000, 2, 2, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(da, db);
        let bits = |ds: &Dataset| ds.features().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let (c, _) = synth_cond_independent(8, 2000, 2, 2, &spec).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn constant_half_group_has_binomial_mean() {
        let spec = SynthSpec {
            group_coefficients: Some(vec![vec![0.0, 0.5]]),
            ..SynthSpec::default()
        };
        let n = 4000;
        let (ds, _) = synth_cond_independent(3, n, 1, 1, &spec).unwrap();
        let mean = ds.sensitive(0).iter().map(|&z| f64::from(z)).sum::<f64>() / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn linear_realizable_conditional_is_the_affine_generator() {
        let spec = SynthSpec::default();
        let (_, dist) = synth_cond_independent(11, 10, 1, 1, &spec).unwrap();
        let coef = &dist.group_coefficients()[0];
        for p in 0..dist.support().nrows() {
            let x = dist.support()[(p, 0)];
            assert_eq!(dist.conditional_z(0)[p], coef[0] * x + coef[1]);
        }
    }

    #[test]
    fn atom_probabilities_sum_to_one() {
        let spec = SynthSpec {
            tasks: 2,
            label_model: LabelModel::Logistic { sharpness: 3.0 },
            ..SynthSpec::default()
        };
        let (_, dist) = synth_cond_independent(5, 10, 2, 2, &spec).unwrap();
        let total: f64 = dist.mass().iter().sum();
        assert!((total - 1.0).abs() <= 1e-15, "{total}");
        assert!(dist.to_dataset().is_ok());
    }

    #[test]
    fn oversized_grids_and_bad_models_are_rejected() {
        let spec = SynthSpec {
            levels: Some(9),
            ..SynthSpec::default()
        };
        assert!(synth_cond_independent(0, 10, 2, 1, &spec).is_err());
        let spec = SynthSpec {
            group_coefficients: Some(vec![vec![2.0, 0.5]]),
            ..SynthSpec::default()
        };
        assert!(synth_cond_independent(0, 10, 1, 1, &spec).is_err());
        assert!(synth_cond_independent(0, 0, 1, 1, &SynthSpec::default()).is_err());
    }
}
