//! Unconstrained proxies: thresholded logistic regression and least squares.

use super::model::{ProxyComponent, TrainingLog};
use crate::data::Population;
use crate::error::{Error, Result};
use crate::learners::{fit_least_squares, fit_logistic, LogisticOptions};

fn check_group(pop: &impl Population, k: usize) -> Result<Vec<u8>> {
    if k >= pop.n_groups() {
        return Err(Error::DimensionMismatch {
            expected: pop.n_groups(),
            got: k,
        });
    }
    Ok(pop.sensitive(k).to_vec())
}

/// Logistic fit of `z_k` on x; the model predicts `1[score >= 0]`.
pub fn fit_baseline_component(pop: &impl Population, k: usize, options: LogisticOptions) -> Result<ProxyComponent> {
    let z = check_group(pop, k)?;
    let model = fit_logistic(pop.features(), &z, Some(pop.mass()), options)?;
    Ok(ProxyComponent {
        group: k,
        coefficients: model.coefficients,
        log: TrainingLog::default(),
    })
}

/// Mass-weighted least-squares fit of `z_k` on x.
pub fn fit_mse_component(pop: &impl Population, k: usize) -> Result<ProxyComponent> {
    let z: Vec<f64> = check_group(pop, k)?.into_iter().map(f64::from).collect();
    let model = fit_least_squares(pop.features(), &z, Some(pop.mass()))?;
    Ok(ProxyComponent {
        group: k,
        coefficients: model.coefficients,
        log: TrainingLog::default(),
    })
}
