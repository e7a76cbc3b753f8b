//! End-to-end experiment: proxy training, weighted binary transform,
//! reductions over a gamma grid, and the on-disk result bundle.
//!
//! Bundle layout: `tradeoff.csv`, `pareto.csv`, `violations.csv`,
//! `manifest.json`, `proxy_models/<kind>.json`, `ensembles/<kind>-g<i>.json`
//! and, after [`emit_plot_data`], `plots/<kind>_<split>.dat`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{
    acs_recipes, apply_binning, synth_cond_independent, Dataset, Population, RawTable, Schema, Standardizer, SynthSpec,
};
use crate::downstream::{
    expected_stats, fit_reductions, pareto_frontier, Ensemble, ReductionsConfig, Split, TradeoffPoint,
};
use crate::error::{Error, Result};
use crate::fairness::{
    build_audit_set, measure_alpha, AuditEntry, FairnessSpec, GroupWeights, ViolationRow, DEGENERATE_PROXY_MASS,
};
use crate::proxy::{fit_proxy, ProxyModel, ProxySpec, Theory};
use crate::rng::derive_seed;
use crate::transform::wbst;

pub const DEFAULT_GRID: [f64; 10] = [0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045];

const AUDIT_SEED_STREAM: u64 = 0xa0d17;
const MANIFEST_FORMAT: u32 = 1;

/// Where the rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        schema: Schema,
        /// Apply the ACS recoding recipes before typing the columns.
        #[serde(default)]
        acs_binning: bool,
    },
    Synthetic {
        n: usize,
        d: usize,
        groups: usize,
        /// Defaults to the master seed.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        spec: SynthSpec,
    },
}

/// A downstream training method: the true sensitive columns, or a proxy.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    TrueLabels,
    Proxy(ProxySpec),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TrueLabels => "true_labels",
            Self::Proxy(spec) => spec.kind().name(),
        }
    }

    fn seeded(&self, seed: u64) -> Self {
        let mut out = self.clone();
        if let Self::Proxy(spec) = &mut out {
            match spec {
                ProxySpec::HProxy(c) => c.seed = seed,
                ProxySpec::Ftpl(c) | ProxySpec::FunctionClass { ftpl: c, .. } => c.seed = seed,
                ProxySpec::BaselineBinary | ProxySpec::Mse | ProxySpec::Alg2(_) => {}
            }
        }
        out
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::TrueLabels => serde_json::json!({ "kind": "true_labels" }).serialize(s),
            Self::Proxy(spec) => spec.serialize(s),
        }
    }
}

/// Accepts `"h_proxy"` as shorthand for `{"kind": "h_proxy"}`, and
/// `baseline` for `baseline_binary`.
impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut value = serde_json::Value::deserialize(d)?;
        if let serde_json::Value::String(kind) = &value {
            value = serde_json::json!({ "kind": kind });
        }
        let obj = value
            .as_object_mut()
            .ok_or_else(|| D::Error::custom("method must be a string or an object"))?;
        match obj.get("kind").and_then(|k| k.as_str()) {
            Some("true_labels") if obj.len() == 1 => return Ok(Self::TrueLabels),
            Some("true_labels") => return Err(D::Error::custom("true_labels takes no options")),
            Some("baseline") => {
                obj.insert("kind".into(), "baseline_binary".into());
            }
            _ => {}
        }
        ProxySpec::deserialize(value).map(Self::Proxy).map_err(D::Error::custom)
    }
}

fn default_fairness() -> FairnessSpec {
    FairnessSpec::EqualizedError
}

fn default_grid() -> Vec<f64> {
    DEFAULT_GRID.to_vec()
}

fn default_fraction() -> f64 {
    0.7
}

fn default_audit() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Sensitive columns to keep, by name; all when absent.
    #[serde(default)]
    pub sensitive: Option<Vec<String>>,
    pub proxies: Vec<Method>,
    /// Downstream constraint; the reductions learner enforces equalized error.
    #[serde(default = "default_fairness")]
    pub fairness: FairnessSpec,
    #[serde(default = "default_grid")]
    pub gamma_grid: Vec<f64>,
    /// Gamma is taken from the grid; the seed from the master seed.
    #[serde(default)]
    pub reductions: ReductionsConfig,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    /// Standardize features with train-split statistics.
    #[serde(default)]
    pub standardize: bool,
    /// Random thresholds added to each proxy's audit set.
    #[serde(default = "default_audit")]
    pub audit_thresholds: usize,
    /// Drives the split, the synthetic sample and every learner seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses a config, or the config echoed inside a `manifest.json`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let is_manifest = value.get("format").is_some() && value.get("config").is_some();
        let config: Self = if is_manifest {
            serde_json::from_value(value["config"].clone())
        } else {
            serde_json::from_value(value)
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.proxies.is_empty() {
            return Err(Error::Config("no proxy kinds selected".into()));
        }
        for (i, m) in self.proxies.iter().enumerate() {
            if self.proxies[..i].iter().any(|o| o.name() == m.name()) {
                return Err(Error::Config(format!("proxy kind `{}` listed twice", m.name())));
            }
        }
        if self.gamma_grid.is_empty() {
            return Err(Error::Config("gamma grid is empty".into()));
        }
        if let Some(g) = self.gamma_grid.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::Config(format!("gamma {g} outside [0, 1]")));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if self.fairness != FairnessSpec::EqualizedError {
            return Err(Error::Config(
                "the downstream learner supports equalized_error only".into(),
            ));
        }
        if let DataSource::Synthetic { n, d, groups, .. } = self.data {
            if n < 2 || d == 0 || groups == 0 {
                return Err(Error::Config(
                    "synthetic data needs n >= 2, d >= 1 and groups >= 1".into(),
                ));
            }
        }
        Ok(())
    }

    /// Makes a relative CSV path relative to `base`.
    /// Relative CSV and output paths become relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let DataSource::Csv { path, .. } = &mut self.data {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(out) = &mut self.out {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
    }

    /// The full dataset before splitting, restricted to the selected sensitive columns.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let data = match &self.data {
            DataSource::Csv {
                path,
                schema,
                acs_binning,
            } => {
                let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let mut table = RawTable::read(file)?;
                if *acs_binning {
                    table = apply_binning(&table, &acs_recipes())?;
                }
                table.to_dataset(schema)?
            }
            DataSource::Synthetic {
                n,
                d,
                groups,
                seed,
                spec,
            } => synth_cond_independent(seed.unwrap_or(self.seed), *n, *d, *groups, spec)?.0,
        };
        match &self.sensitive {
            None => Ok(data),
            Some(names) => {
                let keep = names
                    .iter()
                    .map(|name| {
                        data.sensitive_names()
                            .iter()
                            .position(|s| s == name)
                            .ok_or_else(|| Error::MissingColumn(name.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                data.select_sensitive(&keep)
            }
        }
    }
}

/// Closed-form schedule of one proxy component, when the learner has one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTheory {
    pub group: usize,
    pub theory: Option<Theory>,
    pub executed_rounds: usize,
    pub executed_draws: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub theory: BTreeMap<String, Vec<ComponentTheory>>,
    pub files: Vec<String>,
}

/// Everything written to the bundle, in memory.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub points: Vec<TradeoffPoint>,
    pub frontier: Vec<TradeoffPoint>,
    pub models: Vec<(String, ProxyModel)>,
    /// Parallel to `points` in steps of two (train, test).
    pub ensembles: Vec<Ensemble>,
    /// Audit results of every proxy, tagged with kind and split.
    pub violations: Vec<(String, Split, ViolationRow)>,
    pub manifest: Manifest,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs the whole protocol and writes the bundle into `out`. `jobs` caps
/// the worker threads; the output does not depend on it.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, jobs: Option<usize>) -> Result<RunSummary> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let summary = pool.install(|| compute(config))?;
    write_bundle(&summary, out)?;
    Ok(summary)
}

struct Prepared {
    name: &'static str,
    model: Option<ProxyModel>,
    violations: Vec<(Split, ViolationRow)>,
}

fn compute(config: &ExperimentConfig) -> Result<RunSummary> {
    let data = config.load_dataset()?;
    let (mut train, mut test) = data.split(config.train_fraction, config.seed)?;
    if config.standardize {
        let scaler = Standardizer::fit(&train);
        train = train.map_features(&scaler)?;
        test = test.map_features(&scaler)?;
    }
    log::info!("split into {} train and {} test rows", train.n_rows(), test.n_rows());

    let audit_seed = derive_seed(config.seed, &[AUDIT_SEED_STREAM]);
    let mut prepared = Vec::with_capacity(config.proxies.len());
    for method in &config.proxies {
        let model = match method.seeded(config.seed) {
            Method::TrueLabels => None,
            Method::Proxy(spec) => {
                log::info!("fitting proxy {}", method.name());
                Some(fit_proxy(&train, &spec)?)
            }
        };
        let mut violations = Vec::new();
        if let Some(m) = &model {
            let audit: Vec<AuditEntry> = build_audit_set(
                train.features(),
                train.n_tasks(),
                Some(m),
                config.audit_thresholds,
                audit_seed,
            );
            for (split, pop) in [(Split::Train, &train), (Split::Test, &test)] {
                let report = measure_alpha(pop, GroupWeights::Proxy(m), &audit, config.fairness)?;
                log::info!("{} {} alpha {:.4}", method.name(), split.name(), report.alpha);
                violations.extend(report.rows.into_iter().map(|r| (split, r)));
            }
        }
        prepared.push(Prepared {
            name: method.name(),
            model,
            violations,
        });
    }

    // One transformed training set per real-valued single-column proxy.
    let transformed: Vec<Option<Dataset>> = prepared
        .iter()
        .map(|p| match &p.model {
            Some(m) if m.n_groups() == 1 && m.bound == 1.0 => {
                let doubled = wbst(&train, m, 0)?.dataset;
                // An empty copy means the proxy is constant on the training rows.
                for copy in [0, 1] {
                    let total: f64 = (0..doubled.n_rows())
                        .filter(|&r| doubled.sensitive(0)[r] == copy)
                        .map(|r| doubled.mass()[r])
                        .sum();
                    if total <= DEGENERATE_PROXY_MASS {
                        return Err(Error::DegenerateProxy { group: 0, total });
                    }
                }
                Ok(Some(doubled))
            }
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|m| (0..config.gamma_grid.len()).map(move |g| (m, g)))
        .collect();
    let results: Vec<(Ensemble, [TradeoffPoint; 2])> = cells
        .par_iter()
        .map(|&(mi, gi)| {
            let p = &prepared[mi];
            let gamma = config.gamma_grid[gi];
            let rc = ReductionsConfig {
                gamma,
                seed: config.seed,
                ..config.reductions.clone()
            };
            let fit = match (&p.model, &transformed[mi]) {
                (None, _) => fit_reductions(&train, GroupWeights::True, config.fairness, &rc)?,
                (Some(_), Some(doubled)) => fit_reductions(doubled, GroupWeights::True, config.fairness, &rc)?,
                (Some(m), None) => fit_reductions(&train, GroupWeights::Proxy(m), config.fairness, &rc)?,
            };
            let evaluate = |split: Split, pop: &Dataset| -> Result<TradeoffPoint> {
                let (error, disparity_true) =
                    expected_stats(&fit.ensemble, pop, config.fairness, rc.task, GroupWeights::True)?;
                let disparity_proxy = match &p.model {
                    None => disparity_true,
                    Some(m) => expected_stats(&fit.ensemble, pop, config.fairness, rc.task, GroupWeights::Proxy(m))?.1,
                };
                Ok(TradeoffPoint {
                    kind: p.name.to_string(),
                    gamma,
                    split,
                    error,
                    disparity_true,
                    disparity_proxy,
                })
            };
            let points = [evaluate(Split::Train, &train)?, evaluate(Split::Test, &test)?];
            log::debug!(
                "{} gamma={gamma}: train disparity {:.4}",
                p.name,
                points[0].disparity_true
            );
            Ok((fit.ensemble, points))
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(2 * results.len());
    let mut ensembles = Vec::with_capacity(results.len());
    for (ensemble, pair) in results {
        ensembles.push(ensemble);
        points.extend(pair);
    }
    let mut frontier = Vec::new();
    for p in &prepared {
        for split in [Split::Train, Split::Test] {
            let group: Vec<TradeoffPoint> = points
                .iter()
                .filter(|q| q.kind == p.name && q.split == split)
                .cloned()
                .collect();
            frontier.extend(pareto_frontier(&group)?);
        }
    }

    let mut theory = BTreeMap::new();
    for p in &prepared {
        if let Some(m) = &p.model {
            let comps = m
                .components
                .iter()
                .map(|c| ComponentTheory {
                    group: c.group,
                    theory: c.log.theory.clone(),
                    executed_rounds: c.log.executed_rounds,
                    executed_draws: c.log.executed_draws,
                })
                .collect();
            theory.insert(p.name.to_string(), comps);
        }
    }
    let mut files = vec![
        "tradeoff.csv".to_string(),
        "pareto.csv".to_string(),
        "violations.csv".to_string(),
        "manifest.json".to_string(),
    ];
    for p in &prepared {
        if p.model.is_some() {
            files.push(format!("proxy_models/{}.json", p.name));
        }
        for gi in 0..config.gamma_grid.len() {
            files.push(ensemble_file(p.name, gi));
        }
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        config: config.clone(),
        seed: config.seed,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        theory,
        files,
    };

    let violations: Vec<(String, Split, ViolationRow)> = prepared
        .iter()
        .flat_map(|p| {
            p.violations
                .iter()
                .map(move |(s, r)| (p.name.to_string(), *s, r.clone()))
        })
        .collect();
    let models = prepared
        .into_iter()
        .filter_map(|p| p.model.map(|m| (p.name.to_string(), m)))
        .collect();
    Ok(RunSummary {
        points,
        frontier,
        models,
        ensembles,
        violations,
        manifest,
    })
}

fn ensemble_file(kind: &str, gamma_index: usize) -> String {
    format!("ensembles/{kind}-g{gamma_index}.json")
}

fn point_record(p: &TradeoffPoint) -> [String; 6] {
    [
        p.kind.clone(),
        fmt(p.gamma),
        p.split.name().to_string(),
        fmt(p.error),
        fmt(p.disparity_true),
        fmt(p.disparity_proxy),
    ]
}

const POINT_HEADER: [&str; 6] = ["kind", "gamma", "split", "error", "disparity_true", "disparity_proxy"];

pub fn write_points_csv(path: &Path, points: &[TradeoffPoint]) -> Result<()> {
    let mut w = ::csv::Writer::from_path(path)?;
    w.write_record(POINT_HEADER)?;
    for p in points {
        w.write_record(point_record(p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv(path: &Path) -> Result<Vec<TradeoffPoint>> {
    let mut r = ::csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(POINT_HEADER) {
        return Err(Error::Malformed(format!("{}: unexpected header", path.display())));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Malformed(format!("bad number `{s}`")))
    };
    r.records()
        .map(|rec| {
            let rec = rec?;
            let split = match &rec[2] {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(Error::Malformed(format!("unknown split `{other}`"))),
            };
            Ok(TradeoffPoint {
                kind: rec[0].to_string(),
                gamma: num(&rec[1])?,
                split,
                error: num(&rec[3])?,
                disparity_true: num(&rec[4])?,
                disparity_proxy: num(&rec[5])?,
            })
        })
        .collect()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// All files are written from the calling thread after the parallel work.
fn write_bundle(summary: &RunSummary, out: &Path) -> Result<()> {
    fs::create_dir_all(out.join("proxy_models"))?;
    fs::create_dir_all(out.join("ensembles"))?;
    write_points_csv(&out.join("tradeoff.csv"), &summary.points)?;
    write_points_csv(&out.join("pareto.csv"), &summary.frontier)?;

    let mut w = ::csv::Writer::from_path(out.join("violations.csv"))?;
    w.write_record([
        "kind",
        "split",
        "k",
        "h_id",
        "task_j",
        "true_rate",
        "proxy_rate",
        "violation",
    ])?;
    for (kind, split, r) in &summary.violations {
        w.write_record([
            kind.clone(),
            split.name().to_string(),
            r.k.to_string(),
            r.h_id.clone(),
            r.task_j.to_string(),
            fmt(r.true_rate),
            fmt(r.proxy_rate),
            fmt(r.violation),
        ])?;
    }
    w.flush()?;

    for (kind, model) in &summary.models {
        fs::write(out.join(format!("proxy_models/{kind}.json")), model.to_json()?)?;
    }
    let grid = summary.manifest.config.gamma_grid.len();
    for (i, ensemble) in summary.ensembles.iter().enumerate() {
        let kind = &summary.points[2 * i].kind;
        fs::write(out.join(ensemble_file(kind, i % grid)), ensemble.to_json()?)?;
    }
    write_json(&out.join("manifest.json"), &summary.manifest)
}

/// Splits `tradeoff.csv` of a bundle into one whitespace-separated file per
/// (kind, split) under `plots/`, with columns gamma, error, disparity_true,
/// disparity_proxy. Returns the written paths in first-appearance order.
pub fn emit_plot_data(bundle: &Path) -> Result<Vec<PathBuf>> {
    let table = bundle.join("tradeoff.csv");
    if !table.is_file() {
        return Err(Error::NoResults(bundle.display().to_string()));
    }
    let points = read_points_csv(&table)?;
    if points.is_empty() {
        return Err(Error::NoResults(bundle.display().to_string()));
    }
    let mut keys: Vec<(String, Split)> = Vec::new();
    for p in &points {
        if !keys.iter().any(|(k, s)| *k == p.kind && *s == p.split) {
            keys.push((p.kind.clone(), p.split));
        }
    }
    let dir = bundle.join("plots");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::with_capacity(keys.len());
    for (kind, split) in keys {
        let mut text = String::from("# gamma error disparity_true disparity_proxy\n");
        for p in points.iter().filter(|p| p.kind == kind && p.split == split) {
            text.push_str(&format!(
                "{} {} {} {}\n",
                fmt(p.gamma),
                fmt(p.error),
                fmt(p.disparity_true),
                fmt(p.disparity_proxy)
            ));
        }
        let path = dir.join(format!("{kind}_{}.dat", split.name()));
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(methods: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"data": {{"synthetic": {{"n": 200, "d": 1, "groups": 1}}}}, "proxies": {methods},
                "reductions": {{"rounds": 20}}, "audit_thresholds": 5, "seed": 3}}"#
        ))
        .unwrap()
    }

    #[test]
    fn omitted_grid_is_the_ten_point_default() {
        let c = config(r#"["true_labels"]"#);
        assert_eq!(c.gamma_grid.len(), 10);
        assert_eq!(c.gamma_grid[9], 0.045);
        assert!(c.gamma_grid.windows(2).all(|w| (w[1] - w[0] - 0.005).abs() < 1e-15));
    }

    #[test]
    fn method_shorthands_parse() {
        let c = config(r#"["true_labels", "baseline", {"kind": "h_proxy", "rounds": 5}, "mse"]"#);
        let names: Vec<_> = c.proxies.iter().map(Method::name).collect();
        assert_eq!(names, ["true_labels", "baseline_binary", "h_proxy", "mse"]);
        let echoed = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&echoed).unwrap(), c);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        for bad in [
            r#"{"data": {"synthetic": {"n": 50, "d": 1, "groups": 1}}, "proxies": []}"#,
            r#"{"data": {"synthetic": {"n": 50, "d": 1, "groups": 1}}, "proxies": ["mse"], "gamma_grid": []}"#,
            r#"{"data": {"synthetic": {"n": 50, "d": 1, "groups": 1}}, "proxies": ["mse"], "gamma_grid": [1.5]}"#,
            r#"{"data": {"synthetic": {"n": 50, "d": 1, "groups": 1}}, "proxies": ["mse", "mse"]}"#,
            r#"{"data": {"synthetic": {"n": 50, "d": 1, "groups": 1}}, "proxies": ["nope"]}"#,
            r#"{"data": {"synthetic": {"n": 50, "d": 1, "groups": 1}}, "proxies": ["mse"], "extra": 1}"#,
        ] {
            let err = ExperimentConfig::from_json(bad).unwrap_err();
            assert_eq!(err.family(), crate::error::ErrorFamily::Config, "{bad}: {err}");
        }
    }

    #[test]
    fn bundle_counts_and_plot_partition() {
        let mut c = config(r#"["true_labels", "h_proxy"]"#);
        c.gamma_grid = vec![0.0, 0.02];
        let dir = tempfile::tempdir().unwrap();
        let s = run_experiment(&c, dir.path(), Some(2)).unwrap();
        assert_eq!(s.points.len(), 2 * 2 * 2);
        let back = read_points_csv(&dir.path().join("tradeoff.csv")).unwrap();
        assert_eq!(back, s.points);
        let files = emit_plot_data(dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        for f in &s.manifest.files {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
    }

    #[test]
    fn empty_bundle_has_no_results() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_plot_data(dir.path()), Err(Error::NoResults(_))));
    }
}
