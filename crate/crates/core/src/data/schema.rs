//! Column descriptors read from a TOML schema file.
//!
//! ```toml
//! [[column]]
//! name = "PolyPwr"
//! role = "target"
//! units = "W"
//!
//! [[column]]
//! name = "Season"
//! role = "categorical"
//! categories = ["Winter", "Spring", "Summer", "Fall"]
//! ```
//!
//! Roles are `target`, `numeric`, `categorical`, `timestamp` and `ignore`.
//! Exactly one column is the target and at most one is the timestamp; timestamp
//! cells must be numeric (for example `201712011000`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Target,
    Numeric,
    Categorical,
    Timestamp,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub role: ColumnRole,
    #[serde(default)]
    pub units: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Set on the indicator columns produced by one-hot encoding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_hot_of: Option<String>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, role: ColumnRole, units: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            role,
            units: units.into(),
            categories: Vec::new(),
            one_hot_of: None,
        }
    }

    pub fn categorical(name: impl Into<String>, categories: &[&str]) -> Self {
        Self {
            categories: categories.iter().map(|s| s.to_string()).collect(),
            ..Self::new(name, ColumnRole::Categorical, "")
        }
    }

    /// Whether the column is fed to models as an input feature.
    pub fn is_model_input(&self) -> bool {
        matches!(self.role, ColumnRole::Target | ColumnRole::Numeric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(rename = "column")]
    columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::Data(format!("schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    fn validate(&self) -> Result<()> {
        let targets = self.columns.iter().filter(|c| c.role == ColumnRole::Target).count();
        if targets != 1 {
            return Err(Error::Data(format!(
                "schema needs exactly one target column, found {targets}"
            )));
        }
        let stamps = self.columns.iter().filter(|c| c.role == ColumnRole::Timestamp).count();
        if stamps > 1 {
            return Err(Error::Data("schema allows at most one timestamp column".into()));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if c.name.trim().is_empty() {
                return Err(Error::Data(format!("column {i} has an empty name")));
            }
            if self.columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Data(format!("duplicate column '{}'", c.name)));
            }
            let is_cat = c.role == ColumnRole::Categorical;
            if is_cat && c.categories.is_empty() {
                return Err(Error::Data(format!(
                    "categorical column '{}' lists no categories",
                    c.name
                )));
            }
            if !is_cat && !c.categories.is_empty() {
                return Err(Error::Data(format!(
                    "column '{}' lists categories but is not categorical",
                    c.name
                )));
            }
            for (j, v) in c.categories.iter().enumerate() {
                if c.categories[..j].contains(v) {
                    return Err(Error::Data(format!("column '{}' repeats category '{v}'", c.name)));
                }
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.role == ColumnRole::Target)
            .expect("validated schema has a target")
    }

    pub fn timestamp_index(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.role == ColumnRole::Timestamp)
    }

    pub fn target(&self) -> &ColumnSpec {
        &self.columns[self.target_index()]
    }

    /// Indices of the model input columns, in schema order (the target included).
    pub fn input_indices(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| self.columns[i].is_model_input())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
[[column]]
name = "t"
role = "timestamp"

[[column]]
name = "power"
role = "target"
units = "W"

[[column]]
name = "season"
role = "categorical"
categories = ["winter", "spring", "summer", "autumn"]
"#;

    #[test]
    fn parses_and_roundtrips() {
        let s = Schema::from_toml_str(TEXT).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.target().name, "power");
        assert_eq!(s.timestamp_index(), Some(0));
        assert_eq!(s.input_indices(), vec![1]);
        assert_eq!(Schema::from_toml_str(&s.to_toml_string()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_schemas() {
        assert!(Schema::new(vec![ColumnSpec::new("a", ColumnRole::Numeric, "")]).is_err());
        let two = vec![
            ColumnSpec::new("a", ColumnRole::Target, ""),
            ColumnSpec::new("b", ColumnRole::Target, ""),
        ];
        assert!(Schema::new(two).is_err());
        let dup = vec![
            ColumnSpec::new("a", ColumnRole::Target, ""),
            ColumnSpec::new("a", ColumnRole::Numeric, ""),
        ];
        assert!(Schema::new(dup).is_err());
        let empty_vocab = vec![
            ColumnSpec::new("a", ColumnRole::Target, ""),
            ColumnSpec::new("c", ColumnRole::Categorical, ""),
        ];
        assert!(Schema::new(empty_vocab).is_err());
        assert!(Schema::from_toml_str("[[column]]\nname='x'\nrole='weird'").is_err());
    }
}
