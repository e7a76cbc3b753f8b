//! Proxy learners for missing sensitive attributes.

pub mod alg2;
pub mod auditor;
pub mod baseline;
pub mod ftpl;
pub mod model;
pub mod practical;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::alg2::{alg2_dual_bound, alg2_rounds, fit_alg2_component, Alg2Config};
pub use self::auditor::{
    auditor_step, select_violator, AuditorStep, Constraint, GroupProblem, Oracle, OracleKind, Sign,
};
pub use self::baseline::{fit_baseline_component, fit_mse_component};
pub use self::ftpl::{
    fit_ftpl_component, fit_function_class_component, ftpl_dual_bound, ftpl_rates, ftpl_theory,
    statistical_parity_mode, FtplConfig, LabelRule, MAX_RULES,
};
pub use self::model::{
    average_coefficients, AuditorChoice, ProxyComponent, ProxyKind, ProxyModel, RoundRecord, Theory, TrainingLog,
};
pub use self::practical::{fit_h_proxy_component, proxy_loss, Adam, HProxyConfig, Optimizer, ProxyLoss};

use crate::data::Population;
use crate::error::Result;
use crate::learners::LogisticOptions;

fn single(kind: ProxyKind, bound: f64, component: ProxyComponent, config: impl Serialize) -> Result<ProxyModel> {
    let model = ProxyModel {
        kind,
        bound,
        components: vec![component],
        config: serde_json::to_value(config)?,
    };
    model.validate()?;
    Ok(model)
}

pub fn fit_baseline(pop: &impl Population, k: usize) -> Result<ProxyModel> {
    let options = LogisticOptions::default();
    single(
        ProxyKind::BaselineBinary,
        1.0,
        fit_baseline_component(pop, k, options)?,
        options,
    )
}

pub fn fit_mse(pop: &impl Population, k: usize) -> Result<ProxyModel> {
    single(ProxyKind::Mse, 1.0, fit_mse_component(pop, k)?, serde_json::Value::Null)
}

pub fn fit_h_proxy(pop: &impl Population, k: usize, config: &HProxyConfig) -> Result<ProxyModel> {
    single(ProxyKind::HProxy, 1.0, fit_h_proxy_component(pop, k, config)?, config)
}

pub fn fit_alg2_linear(pop: &impl Population, k: usize, config: &Alg2Config) -> Result<ProxyModel> {
    single(
        ProxyKind::Alg2,
        config.bound,
        fit_alg2_component(pop, k, config)?,
        config,
    )
}

pub fn fit_alg1_ftpl(pop: &impl Population, k: usize, config: &FtplConfig) -> Result<ProxyModel> {
    single(
        ProxyKind::Ftpl,
        config.bound,
        fit_ftpl_component(pop, k, config)?,
        config,
    )
}

pub fn fit_function_class(
    pop: &impl Population,
    k: usize,
    rules: &[LabelRule],
    config: &FtplConfig,
) -> Result<ProxyModel> {
    let echo = serde_json::json!({ "ftpl": config, "rules": rules });
    single(
        ProxyKind::FunctionClass,
        config.bound,
        fit_function_class_component(pop, k, rules, config)?,
        echo,
    )
}

/// A proxy learner with its configuration, applied to every sensitive column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxySpec {
    BaselineBinary,
    Mse,
    HProxy(#[serde(default)] HProxyConfig),
    Ftpl(#[serde(default)] FtplConfig),
    Alg2(#[serde(default)] Alg2Config),
    FunctionClass {
        rules: Vec<LabelRule>,
        #[serde(default)]
        ftpl: FtplConfig,
    },
}

impl ProxySpec {
    pub fn kind(&self) -> ProxyKind {
        match self {
            Self::BaselineBinary => ProxyKind::BaselineBinary,
            Self::Mse => ProxyKind::Mse,
            Self::HProxy(_) => ProxyKind::HProxy,
            Self::Ftpl(_) => ProxyKind::Ftpl,
            Self::Alg2(_) => ProxyKind::Alg2,
            Self::FunctionClass { .. } => ProxyKind::FunctionClass,
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            Self::Ftpl(c) | Self::FunctionClass { ftpl: c, .. } => c.bound,
            Self::Alg2(c) => c.bound,
            _ => 1.0,
        }
    }

    fn fit_component(&self, pop: &(impl Population + Sync), k: usize) -> Result<ProxyComponent> {
        match self {
            Self::BaselineBinary => fit_baseline_component(pop, k, LogisticOptions::default()),
            Self::Mse => fit_mse_component(pop, k),
            Self::HProxy(c) => fit_h_proxy_component(pop, k, c),
            Self::Ftpl(c) => fit_ftpl_component(pop, k, c),
            Self::Alg2(c) => fit_alg2_component(pop, k, c),
            Self::FunctionClass { rules, ftpl } => fit_function_class_component(pop, k, rules, ftpl),
        }
    }
}

/// Fits one component per sensitive column; groups train independently and
/// in parallel, with results identical to a serial schedule.
pub fn fit_proxy(pop: &(impl Population + Sync), spec: &ProxySpec) -> Result<ProxyModel> {
    let components = (0..pop.n_groups())
        .into_par_iter()
        .map(|k| spec.fit_component(pop, k))
        .collect::<Result<Vec<_>>>()?;
    let model = ProxyModel {
        kind: spec.kind(),
        bound: spec.bound(),
        components,
        config: serde_json::to_value(spec)?,
    };
    model.validate()?;
    Ok(model)
}
