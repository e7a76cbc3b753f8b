//! Categorical code binning for census-style exports.

use serde::{Deserialize, Serialize};

use super::csv::RawTable;
use crate::error::{Error, Result};

/// Columns removed before binning ACS person records: high-cardinality
/// geography / occupation codes and the relationship code.
pub const ACS_DROPPED_COLUMNS: [&str; 6] = ["OCCP", "POBP", "ST", "PUMA", "POWPUMA", "RELP"];

/// One output category and the raw codes folded into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    pub codes: Vec<i64>,
}

/// Replaces raw integer codes of `column` by the index of the bin that
/// contains them and removes the `dropped` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningRecipe {
    pub column: String,
    pub bins: Vec<Bin>,
    #[serde(default)]
    pub dropped: Vec<String>,
}

impl BinningRecipe {
    pub fn new(column: &str, bins: &[(&str, &[i64])]) -> Self {
        Self {
            column: column.to_string(),
            bins: bins
                .iter()
                .map(|(label, codes)| Bin {
                    label: label.to_string(),
                    codes: codes.to_vec(),
                })
                .collect(),
            dropped: Vec::new(),
        }
    }

    pub fn dropping(mut self, columns: &[&str]) -> Self {
        self.dropped = columns.iter().map(|c| c.to_string()).collect();
        self
    }

    /// Bin index holding `code`, if any.
    pub fn bin_of(&self, code: i64) -> Option<usize> {
        self.bins.iter().position(|b| b.codes.contains(&code))
    }

    /// Checks that no code appears in two bins.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for bin in &self.bins {
            for &code in &bin.codes {
                if !seen.insert(code) {
                    return Err(Error::Malformed(format!(
                        "code {code} appears in more than one bin of `{}`",
                        self.column
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Built-in recipes for SCHL (7 bins), ESP (6 bins) and JWTR (8 bins).
///
/// The SCHL recipe also drops [`ACS_DROPPED_COLUMNS`].
pub fn acs_recipes() -> Vec<BinningRecipe> {
    let schl_low: Vec<i64> = (0..=15).collect();
    vec![
        BinningRecipe::new(
            "SCHL",
            &[
                ("Didn't finish high school", &schl_low),
                ("Finished high school or equivalent", &[16, 17, 18, 19]),
                ("Associate's degree", &[20]),
                ("Bachelor's degree", &[21]),
                ("Master's degree", &[22]),
                ("Other professional degree", &[23]),
                ("PhD", &[24]),
            ],
        )
        .dropping(&ACS_DROPPED_COLUMNS),
        BinningRecipe::new(
            "ESP",
            &[
                ("N/A", &[0]),
                ("Living with two parents, both working", &[1]),
                ("Living with two parents, one working", &[2, 3]),
                ("Living with two parents, neither", &[4]),
                ("Living with one parent, working", &[5, 7]),
                ("Living with one parent, not working", &[6, 8]),
            ],
        ),
        BinningRecipe::new(
            "JWTR",
            &[
                ("Personal vehicle", &[1, 8]),
                ("Bus, streetcar, or trolley bus", &[2, 3]),
                ("Subway, elevated, or railroad", &[4, 5]),
                ("Taxicab", &[7]),
                ("Bicycle", &[9]),
                ("Walked", &[10]),
                ("Worked at home", &[11]),
                ("Other (including Ferry)", &[6, 12]),
            ],
        ),
    ]
}

fn parse_code(raw: &str) -> Option<i64> {
    let t = raw.trim();
    if let Ok(v) = t.parse::<i64>() {
        return Some(v);
    }
    let v = t.parse::<f64>().ok()?;
    (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Applies each recipe in order: drop listed columns, then bin the target column.
pub fn apply_binning(table: &RawTable, recipes: &[BinningRecipe]) -> Result<RawTable> {
    let mut out = table.clone();
    for recipe in recipes {
        recipe.validate()?;
        for name in &recipe.dropped {
            out.drop_column(name);
        }
        let col = out
            .column_index(&recipe.column)
            .ok_or_else(|| Error::MissingColumn(recipe.column.clone()))?;
        for row in &mut out.rows {
            let cell = &row[col];
            let bin = parse_code(cell)
                .and_then(|c| recipe.bin_of(c))
                .ok_or_else(|| Error::UnknownCode {
                    column: recipe.column.clone(),
                    code: cell.clone(),
                })?;
            row[col] = bin.to_string();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(col: &str, codes: &[&str]) -> RawTable {
        RawTable {
            headers: vec![col.to_string(), "AGEP".to_string()],
            rows: codes.iter().map(|c| vec![c.to_string(), "30".to_string()]).collect(),
        }
    }

    fn recipe(name: &str) -> BinningRecipe {
        acs_recipes().into_iter().find(|r| r.column == name).unwrap()
    }

    #[test]
    fn built_in_recipes_have_listed_shapes() {
        let shapes: Vec<(String, usize)> = acs_recipes().iter().map(|r| (r.column.clone(), r.bins.len())).collect();
        assert_eq!(shapes, vec![("SCHL".into(), 7), ("ESP".into(), 6), ("JWTR".into(), 8)]);
        for r in acs_recipes() {
            r.validate().unwrap();
        }
    }

    #[test]
    fn known_codes_map_to_their_bins() {
        assert_eq!(recipe("SCHL").bin_of(16), Some(1));
        assert_eq!(recipe("JWTR").bin_of(6), Some(7));
        assert_eq!(recipe("ESP").bin_of(3), Some(2));
        let out = apply_binning(&table("SCHL", &["16", "24", "3", "21.0"]), &[recipe("SCHL")]).unwrap();
        let col: Vec<&str> = out.rows.iter().map(|r| r[0].as_str()).collect();
        assert_eq!(col, ["1", "6", "0", "3"]);
    }

    #[test]
    fn unknown_code_is_an_error() {
        let err = apply_binning(&table("JWTR", &["1", "13"]), &[recipe("JWTR")]).unwrap_err();
        assert_eq!(
            err,
            Error::UnknownCode {
                column: "JWTR".into(),
                code: "13".into()
            }
        );
        let err = apply_binning(&table("ESP", &[""]), &[recipe("ESP")]).unwrap_err();
        assert!(matches!(err, Error::UnknownCode { .. }));
    }

    #[test]
    fn missing_column_is_an_error() {
        let err = apply_binning(&table("AGE", &["1"]), &[recipe("ESP")]).unwrap_err();
        assert_eq!(err, Error::MissingColumn("ESP".into()));
    }

    #[test]
    fn dropped_columns_are_removed() {
        let t = RawTable {
            headers: vec!["SCHL".into(), "ST".into(), "RELP".into()],
            rows: vec![vec!["20".into(), "6".into(), "0".into()]],
        };
        let out = apply_binning(&t, &[recipe("SCHL")]).unwrap();
        assert_eq!(out.headers, vec!["SCHL".to_string()]);
        assert_eq!(out.rows, vec![vec!["2".to_string()]]);
    }

    #[test]
    fn rebinning_is_idempotent_only_when_indices_are_fixed_points() {
        // Bin indices 0 and 1 are themselves raw codes of bins 0 and 1.
        let fixed = BinningRecipe::new("C", &[("a", &[0]), ("b", &[1, 5])]);
        let once = apply_binning(&table("C", &["5", "0", "1"]), std::slice::from_ref(&fixed)).unwrap();
        let twice = apply_binning(&once, &[fixed]).unwrap();
        assert_eq!(once, twice);

        // JWTR bin 0 is not a raw JWTR code.
        let once = apply_binning(&table("JWTR", &["1", "6"]), &[recipe("JWTR")]).unwrap();
        let err = apply_binning(&once, &[recipe("JWTR")]).unwrap_err();
        assert_eq!(
            err,
            Error::UnknownCode {
                column: "JWTR".into(),
                code: "0".into()
            }
        );
    }

    #[test]
    fn overlapping_bins_are_rejected() {
        let bad = BinningRecipe::new("C", &[("a", &[1, 2]), ("b", &[2])]);
        assert!(bad.validate().is_err());
    }
}
