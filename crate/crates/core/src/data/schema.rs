use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row layout of a delimited input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// One row per outcome element with a within-participant unit index.
    #[default]
    Long,
    /// One row per participant with one column per outcome element.
    Wide,
}

/// A categorical column expanded into indicator columns against an explicit
/// reference level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub column: String,
    pub reference: String,
    /// Non-reference levels in indicator order. When empty, levels are taken
    /// in first-appearance order.
    #[serde(default)]
    pub levels: Vec<String>,
}

/// Column mapping for [`load_dataset`](super::load_dataset), usually read
/// from a TOML file:
///
/// ```toml
/// layout = "long"
/// delimiter = ","
/// participant_id = "participant_id"
/// evaluator_id = "evaluator_id"
/// unit_index = "unit_index"
/// outcome = "outcome"
/// covariates = ["age", "age_sq", "status"]
/// unit_covariates = []
///
/// [[categorical]]
/// column = "status"
/// reference = "excellent"
/// ```
///
/// For `layout = "wide"`, `outcomes` lists the outcome columns in unit order;
/// when omitted, every `outcome_<n>` header is used, ordered by `n`. Empty
/// wide outcome cells are missing elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaConfig {
    pub layout: Layout,
    pub delimiter: char,
    pub participant_id: String,
    pub evaluator_id: String,
    pub unit_index: String,
    pub outcome: String,
    pub outcomes: Vec<String>,
    pub covariates: Vec<String>,
    pub unit_covariates: Vec<String>,
    pub categorical: Vec<CategoricalColumn>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            layout: Layout::Long,
            delimiter: ',',
            participant_id: "participant_id".into(),
            evaluator_id: "evaluator_id".into(),
            unit_index: "unit_index".into(),
            outcome: "outcome".into(),
            outcomes: Vec::new(),
            covariates: Vec::new(),
            unit_covariates: Vec::new(),
            categorical: Vec::new(),
        }
    }
}

impl SchemaConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: SchemaConfig = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.check()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    /// Long-layout schema with the given numeric covariates.
    pub fn long(covariates: &[String], unit_covariates: &[String]) -> Self {
        SchemaConfig {
            covariates: covariates.to_vec(),
            unit_covariates: unit_covariates.to_vec(),
            ..Default::default()
        }
    }

    pub(crate) fn categorical_for(&self, column: &str) -> Option<&CategoricalColumn> {
        self.categorical.iter().find(|c| c.column == column)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !self.delimiter.is_ascii() {
            return Err(Error::Schema("delimiter must be a single ASCII character".into()));
        }
        if self.layout == Layout::Wide && !self.unit_covariates.is_empty() {
            return Err(Error::Schema("unit covariates require the long layout".into()));
        }
        for cat in &self.categorical {
            let declared = self.covariates.contains(&cat.column) || self.unit_covariates.contains(&cat.column);
            if !declared {
                return Err(Error::Schema(format!(
                    "categorical column `{}` is not listed among the covariates",
                    cat.column
                )));
            }
            if cat.levels.contains(&cat.reference) {
                return Err(Error::Schema(format!(
                    "categorical column `{}` lists its reference level `{}` as an indicator level",
                    cat.column, cat.reference
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let schema = SchemaConfig::from_toml_str(
            r#"
            layout = "wide"
            delimiter = ";"
            covariates = ["age", "status"]
            [[categorical]]
            column = "status"
            reference = "excellent"
            levels = ["very_good"]
            "#,
        )
        .unwrap();
        assert_eq!(schema.layout, Layout::Wide);
        assert_eq!(schema.delimiter, ';');
        assert_eq!(schema.participant_id, "participant_id");
        assert_eq!(schema.categorical_for("status").unwrap().reference, "excellent");
    }

    #[test]
    fn rejects_undeclared_categorical_and_unknown_keys() {
        let err = SchemaConfig::from_toml_str("[[categorical]]\ncolumn = \"s\"\nreference = \"a\"\n");
        assert!(matches!(err, Err(Error::Schema(_))));
        let err = SchemaConfig::from_toml_str("colour = \"red\"\n");
        assert!(matches!(err, Err(Error::Schema(_))));
    }
}
