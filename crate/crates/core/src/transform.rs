//! Weighted binary sample transformation: a real-valued proxy for one group
//! becomes a doubled dataset with a binary pseudo-group column and masses.

use nalgebra::DMatrix;

use crate::data::{Dataset, Population};
use crate::error::{Error, Result};
use crate::proxy::ProxyModel;

/// `2n` rows. Row `i` is the `z~ = 0` copy of source row `i` with mass
/// `mass_i (1 - zhat_i)`; row `n + i` is the `z~ = 1` copy with mass
/// `mass_i zhat_i`. Zero-mass rows are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBinaryDataset {
    pub dataset: Dataset,
    /// Source row of every output row.
    pub source: Vec<usize>,
}

impl WeightedBinaryDataset {
    pub fn n_source(&self) -> usize {
        self.source.len() / 2
    }
}

/// Transforms on the proxy values of group `k`; the proxy's bound must be 1.
pub fn wbst(dataset: &Dataset, proxy: &ProxyModel, k: usize) -> Result<WeightedBinaryDataset> {
    if proxy.bound != 1.0 {
        return Err(Error::MOutOfRange(proxy.bound));
    }
    let zhat = proxy.predict(dataset.features(), k)?;
    wbst_from_values(dataset, &zhat)
}

/// Same construction from explicit proxy values in `[0, 1]`.
pub fn wbst_from_values(dataset: &Dataset, zhat: &[f64]) -> Result<WeightedBinaryDataset> {
    let n = dataset.n_rows();
    if zhat.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: zhat.len(),
        });
    }
    if let Some(bad) = zhat.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::MOutOfRange(*bad));
    }
    let x = dataset.features();
    let d = x.ncols();
    let features = DMatrix::from_fn(2 * n, d, |r, c| x[(r % n, c)]);
    let mass_in = dataset.mass();
    let mut mass = Vec::with_capacity(2 * n);
    mass.extend((0..n).map(|i| mass_in[i] * (1.0 - zhat[i])));
    mass.extend((0..n).map(|i| mass_in[i] * zhat[i]));
    let pseudo: Vec<u8> = (0..2 * n).map(|r| u8::from(r >= n)).collect();
    let labels = (0..dataset.n_tasks())
        .map(|j| {
            let y = dataset.label(j);
            (0..2 * n).map(|r| y[r % n]).collect()
        })
        .collect();
    let out = Dataset::with_names(
        features,
        vec![pseudo],
        labels,
        Some(mass),
        dataset.feature_names().to_vec(),
        vec!["pseudo_group".into()],
        dataset.label_names().to_vec(),
    )?;
    Ok(WeightedBinaryDataset {
        dataset: out,
        source: (0..2 * n).map(|r| r % n).collect(),
    })
}
