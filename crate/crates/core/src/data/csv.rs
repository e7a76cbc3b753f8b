//! CSV ingestion with a JSON column-role schema.
//!
//! Row numbers in errors are 0-based indices of data rows (the header is not
//! counted).

use std::collections::{BTreeSet, HashSet};
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Column roles for [`load_csv`].
///
/// When `features` is empty every column that is neither sensitive nor a
/// label becomes a feature. Columns listed in `categorical` are one-hot
/// encoded; all other features must parse as finite numbers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default)]
    pub features: Vec<String>,
    pub sensitive: Vec<String>,
    pub labels: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Untyped table: header plus string cells, all rows the same width.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = ::csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(::csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::Malformed("missing header row".into()));
        }
        let mut unique = HashSet::new();
        for h in &headers {
            if !unique.insert(h.as_str()) {
                return Err(Error::Malformed(format!("duplicate column `{h}`")));
            }
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(Self { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn drop_column(&mut self, name: &str) {
        if let Some(c) = self.column_index(name) {
            self.headers.remove(c);
            for row in &mut self.rows {
                row.remove(c);
            }
        }
    }

    /// Types the table according to `schema`.
    pub fn to_dataset(&self, schema: &Schema) -> Result<Dataset> {
        if schema.sensitive.is_empty() {
            return Err(Error::Config("schema designates no sensitive column".into()));
        }
        if schema.labels.is_empty() {
            return Err(Error::Config("schema designates no label column".into()));
        }
        let find = |name: &String| {
            self.column_index(name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))
        };
        let sensitive_idx = schema.sensitive.iter().map(find).collect::<Result<Vec<_>>>()?;
        let label_idx = schema.labels.iter().map(find).collect::<Result<Vec<_>>>()?;
        for name in schema.features.iter().chain(&schema.categorical) {
            find(name)?;
        }

        let reserved: HashSet<&str> = schema
            .sensitive
            .iter()
            .chain(&schema.labels)
            .map(String::as_str)
            .collect();
        let wanted: HashSet<&str> = schema
            .features
            .iter()
            .chain(&schema.categorical)
            .map(String::as_str)
            .collect();
        let feature_cols: Vec<usize> = (0..self.headers.len())
            .filter(|&c| {
                let h = self.headers[c].as_str();
                !reserved.contains(h) && (wanted.is_empty() || wanted.contains(h))
            })
            .collect();
        if feature_cols.is_empty() {
            return Err(Error::Config("schema leaves no feature columns".into()));
        }
        if self.rows.is_empty() {
            return Err(Error::EmptyInput("csv has no data rows"));
        }
        let categorical: HashSet<&str> = schema.categorical.iter().map(String::as_str).collect();

        // Each source column expands to one numeric column or to its sorted categories.
        let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
        for &c in &feature_cols {
            let name = &self.headers[c];
            if categorical.contains(name.as_str()) {
                let cats: BTreeSet<&str> = self.rows.iter().map(|r| r[c].as_str()).collect();
                for cat in cats {
                    let values = self.rows.iter().map(|r| f64::from(u8::from(r[c] == cat))).collect();
                    columns.push((format!("{name}={cat}"), values));
                }
            } else {
                let values = self
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(row, r)| {
                        r[c].parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| Error::UnparseableCell {
                                row,
                                column: name.clone(),
                                value: r[c].clone(),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                columns.push((name.clone(), values));
            }
        }

        let n = self.rows.len();
        let features = DMatrix::from_fn(n, columns.len(), |r, c| columns[c].1[r]);
        let sensitive = sensitive_idx
            .iter()
            .map(|&c| self.binary_column(c, true))
            .collect::<Result<Vec<_>>>()?;
        let labels = label_idx
            .iter()
            .map(|&c| self.binary_column(c, false))
            .collect::<Result<Vec<_>>>()?;
        Dataset::with_names(
            features,
            sensitive,
            labels,
            None,
            columns.into_iter().map(|(name, _)| name).collect(),
            schema.sensitive.clone(),
            schema.labels.clone(),
        )
    }

    fn binary_column(&self, c: usize, sensitive: bool) -> Result<Vec<u8>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(row, r)| {
                parse_binary(&r[c]).ok_or_else(|| {
                    let column = self.headers[c].clone();
                    let value = r[c].clone();
                    if sensitive {
                        Error::NonBinarySensitive { row, column, value }
                    } else {
                        Error::NonBinaryLabel { row, column, value }
                    }
                })
            })
            .collect()
    }
}

fn parse_binary(cell: &str) -> Option<u8> {
    match cell.to_ascii_lowercase().as_str() {
        "1" | "true" => Some(1),
        "0" | "false" => Some(0),
        other => match other.parse::<f64>() {
            Ok(0.0) => Some(0),
            Ok(1.0) => Some(1),
            _ => None,
        },
    }
}

/// Parses CSV bytes into a typed dataset.
pub fn parse_csv(bytes: &[u8], schema: &Schema) -> Result<Dataset> {
    RawTable::read(bytes)?.to_dataset(schema)
}

/// Reads a CSV file into a typed dataset.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let file =
        std::fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    RawTable::read(std::io::BufReader::new(file))?.to_dataset(schema)
}
