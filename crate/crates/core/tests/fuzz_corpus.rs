use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use proxyfair::data::{acs_recipes, apply_binning, parse_csv, RawTable, Schema};
use proxyfair::downstream::Ensemble;
use proxyfair::experiment::ExperimentConfig;
use proxyfair::proxy::ProxyModel;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn csv_seeds() {
    let schema = Schema {
        sensitive: vec!["s".into()],
        labels: vec!["y".into()],
        categorical: vec!["c".into()],
        ..Schema::default()
    };
    let parsed: Vec<(String, bool)> = seeds("parse_csv")
        .into_iter()
        .map(|(name, bytes)| (name, parse_csv(&bytes, &schema).is_ok()))
        .collect();
    assert!(parsed.contains(&("mixed.csv".into(), true)), "{parsed:?}");
    assert!(parsed.contains(&("bad_binary.csv".into(), false)), "{parsed:?}");
}

#[test]
fn schema_seeds() {
    for (name, bytes) in seeds("schema_json") {
        let schema = Schema::from_json(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let _ = parse_csv(b"a,b,c\n1,2,3\n0,1,x\n", &schema);
    }
}

#[test]
fn binning_seeds() {
    for (name, bytes) in seeds("raw_table_binning") {
        let table = RawTable::read(&bytes[..]).unwrap();
        let binned = apply_binning(&table, &acs_recipes());
        assert_eq!(binned.is_ok(), name == "acs.csv", "{name}");
    }
}

#[test]
fn proxy_model_seeds_round_trip() {
    for (name, bytes) in seeds("proxy_model_json") {
        let model = ProxyModel::from_json(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = ProxyModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(again.to_json().unwrap(), model.to_json().unwrap());
    }
}

#[test]
fn ensemble_seeds() {
    for (name, bytes) in seeds("ensemble_json") {
        match Ensemble::from_json(text(&bytes)) {
            Ok(e) => assert_eq!(Ensemble::from_json(&e.to_json().unwrap()).unwrap(), e),
            Err(_) => assert_eq!(name, "empty.json"),
        }
    }
}

#[test]
fn config_seeds() {
    for (name, bytes) in seeds("experiment_config") {
        ExperimentConfig::from_json(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

const TARGETS: [&str; 6] = [
    "parse_csv",
    "schema_json",
    "raw_table_binning",
    "proxy_model_json",
    "ensemble_json",
    "experiment_config",
];

/// Every entry point for `target`; errors are fine, panics are not.
fn feed(target: &str, bytes: &[u8]) {
    let as_text = std::str::from_utf8(bytes);
    match target {
        "parse_csv" => {
            let schema = Schema {
                sensitive: vec!["s".into()],
                labels: vec!["y".into()],
                ..Schema::default()
            };
            let _ = parse_csv(bytes, &schema);
        }
        "schema_json" => {
            if let Ok(schema) = as_text
                .map_err(|_| ())
                .and_then(|t| Schema::from_json(t).map_err(|_| ()))
            {
                let _ = parse_csv(b"a,b,c\n1,2,3\n0,1,x\n", &schema);
            }
        }
        "raw_table_binning" => {
            if let Ok(table) = RawTable::read(bytes) {
                let _ = apply_binning(&table, &acs_recipes());
            }
        }
        "proxy_model_json" => {
            if let Ok(model) = as_text
                .map_err(|_| ())
                .and_then(|t| ProxyModel::from_json(t).map_err(|_| ()))
            {
                let again = ProxyModel::from_json(&model.to_json().unwrap()).unwrap();
                assert_eq!(again.to_json().unwrap(), model.to_json().unwrap());
            }
        }
        "ensemble_json" => {
            if let Ok(e) = as_text
                .map_err(|_| ())
                .and_then(|t| Ensemble::from_json(t).map_err(|_| ()))
            {
                assert_eq!(Ensemble::from_json(&e.to_json().unwrap()).unwrap(), e);
            }
        }
        _ => {
            if let Ok(t) = as_text {
                let _ = ExperimentConfig::from_json(t);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn mutated_seeds_never_panic(
        target in 0usize..6,
        pick in any::<prop::sample::Index>(),
        edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>(), 0u8..3), 1..8),
    ) {
        let name = TARGETS[target];
        let all = seeds(name);
        let mut bytes = all[pick.index(all.len())].1.clone();
        for (at, byte, op) in edits {
            let i = at.index(bytes.len() + 1);
            match op {
                0 if i < bytes.len() => bytes[i] = byte,
                1 if i < bytes.len() => { bytes.remove(i); }
                _ => bytes.insert(i, byte),
            }
        }
        feed(name, &bytes);
    }
}
