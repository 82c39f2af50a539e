//! Measurement schema: which variables a record carries, their category
//! vocabularies and normal values, and the derived channel layout of the
//! encoded hourly matrix.
//!
//! The schema is data, not code. The default (15 hourly physiological
//! variables plus a demographic block, 76 encoded channels) ships embedded in
//! the binary; an alternative file can be supplied wherever a schema is
//! accepted. Encoded layout: each variable contributes its value channels in
//! schema order (one channel per numeric variable, one one-hot block per
//! categorical variable), followed by one observation-mask channel per
//! variable in the same order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_SCHEMA_TOML: &str = include_str!("../data/schema.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemographicSpec {
    /// Number of ethnicity codes; encoded one-hot.
    pub ethnicity_categories: usize,
    /// Fallback values when a demographic field is absent.
    pub age_normal: f64,
    pub height_normal: f64,
    pub weight_normal: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    name: String,
    label: String,
    kind: String,
    system: String,
    #[serde(default)]
    unit: String,
    normal_value: Option<f64>,
    lower: Option<f64>,
    upper: Option<f64>,
    normal_category: Option<String>,
    categories: Option<Vec<String>>,
    codes: Option<Vec<f64>>,
    reference: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    demographics: DemographicSpec,
    #[serde(rename = "variable")]
    variables: Vec<RawVariable>,
}

#[derive(Debug, Clone)]
pub enum VariableKind {
    Numeric {
        normal: f64,
        lower: Option<f64>,
        upper: Option<f64>,
    },
    Categorical {
        /// Vocabulary; strings outside it map to the last entry (keep a
        /// catch-all bucket last).
        categories: Vec<String>,
        /// Numeric code per category, used when plotting/exporting values.
        codes: Vec<f64>,
        normal_index: usize,
        /// Reference line in code units for reports.
        reference: Option<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub label: String,
    pub system: String,
    pub unit: String,
    pub kind: VariableKind,
}

impl Variable {
    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, VariableKind::Numeric { .. })
    }

    /// Width of this variable's value block in the encoded matrix.
    pub fn value_width(&self) -> usize {
        match &self.kind {
            VariableKind::Numeric { .. } => 1,
            VariableKind::Categorical { categories, .. } => categories.len(),
        }
    }

    /// Index in the vocabulary, falling back to the final catch-all bucket.
    pub fn category_index(&self, s: &str) -> usize {
        match &self.kind {
            VariableKind::Categorical { categories, .. } => categories
                .iter()
                .position(|c| c == s)
                .unwrap_or_else(|| {
                    log::warn!("unknown category {s:?} for {}; using fallback bucket", self.name);
                    categories.len() - 1
                }),
            VariableKind::Numeric { .. } => panic!("category_index on numeric variable"),
        }
    }

    /// Numeric code of a recorded value, for plots and exports.
    pub fn code_of(&self, s: &str) -> f64 {
        match &self.kind {
            VariableKind::Categorical { codes, .. } => codes[self.category_index(s)],
            VariableKind::Numeric { .. } => panic!("code_of on numeric variable"),
        }
    }
}

/// Channel positions of the encoded hourly matrix.
#[derive(Debug, Clone)]
pub struct Layout {
    pub width: usize,
    pub value_offset: Vec<usize>,
    pub value_width: Vec<usize>,
    pub mask_offset: usize,
}

#[derive(Debug, Clone)]
pub struct Schema {
    pub demographics: DemographicSpec,
    variables: Vec<Variable>,
    by_name: BTreeMap<String, usize>,
    layout: Layout,
    source: String,
}

impl Schema {
    pub fn default_schema() -> Schema {
        Self::from_toml_str(DEFAULT_SCHEMA_TOML)
            .expect("embedded default schema must parse")
    }

    pub fn load(path: &Path) -> Result<Schema> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Schema> {
        let raw: RawSchema = toml::from_str(text)
            .map_err(|e| Error::Schema(format!("schema parse failed: {e}")))?;
        if raw.variables.is_empty() {
            return Err(Error::Schema("schema lists no variables".into()));
        }
        if raw.demographics.ethnicity_categories == 0 {
            return Err(Error::Schema("ethnicity_categories must be positive".into()));
        }

        let mut variables = Vec::with_capacity(raw.variables.len());
        for rv in &raw.variables {
            variables.push(Self::build_variable(rv)?);
        }

        let mut by_name = BTreeMap::new();
        for (i, v) in variables.iter().enumerate() {
            if by_name.insert(v.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate variable name {:?}", v.name)));
            }
        }

        let mut value_offset = Vec::with_capacity(variables.len());
        let mut value_width = Vec::with_capacity(variables.len());
        let mut offset = 0;
        for v in &variables {
            value_offset.push(offset);
            value_width.push(v.value_width());
            offset += v.value_width();
        }
        let mask_offset = offset;
        let layout = Layout {
            width: mask_offset + variables.len(),
            value_offset,
            value_width,
            mask_offset,
        };

        Ok(Schema {
            demographics: raw.demographics,
            variables,
            by_name,
            layout,
            source: text.to_string(),
        })
    }

    fn build_variable(rv: &RawVariable) -> Result<Variable> {
        let kind = match rv.kind.as_str() {
            "numeric" => {
                let normal = rv.normal_value.ok_or_else(|| {
                    Error::Schema(format!("{}: numeric variable needs normal_value", rv.name))
                })?;
                if rv.categories.is_some() || rv.codes.is_some() || rv.normal_category.is_some() {
                    return Err(Error::Schema(format!(
                        "{}: categorical fields on a numeric variable",
                        rv.name
                    )));
                }
                if let (Some(lo), Some(hi)) = (rv.lower, rv.upper) {
                    if lo >= hi {
                        return Err(Error::Schema(format!(
                            "{}: lower bound {lo} is not below upper bound {hi}",
                            rv.name
                        )));
                    }
                }
                VariableKind::Numeric {
                    normal,
                    lower: rv.lower,
                    upper: rv.upper,
                }
            }
            "categorical" => {
                let categories = rv.categories.clone().ok_or_else(|| {
                    Error::Schema(format!("{}: categorical variable needs categories", rv.name))
                })?;
                if categories.len() < 2 {
                    return Err(Error::Schema(format!(
                        "{}: needs at least two categories",
                        rv.name
                    )));
                }
                let mut seen = std::collections::BTreeSet::new();
                for c in &categories {
                    if !seen.insert(c) {
                        return Err(Error::Schema(format!(
                            "{}: duplicate category {c:?}",
                            rv.name
                        )));
                    }
                }
                let codes = rv.codes.clone().ok_or_else(|| {
                    Error::Schema(format!("{}: categorical variable needs codes", rv.name))
                })?;
                if codes.len() != categories.len() {
                    return Err(Error::Schema(format!(
                        "{}: {} codes for {} categories",
                        rv.name,
                        codes.len(),
                        categories.len()
                    )));
                }
                let normal = rv.normal_category.as_ref().ok_or_else(|| {
                    Error::Schema(format!("{}: categorical variable needs normal_category", rv.name))
                })?;
                let normal_index = categories.iter().position(|c| c == normal).ok_or_else(|| {
                    Error::Schema(format!(
                        "{}: normal_category {normal:?} not in categories",
                        rv.name
                    ))
                })?;
                if rv.normal_value.is_some() || rv.lower.is_some() || rv.upper.is_some() {
                    return Err(Error::Schema(format!(
                        "{}: numeric fields on a categorical variable",
                        rv.name
                    )));
                }
                VariableKind::Categorical {
                    categories,
                    codes,
                    normal_index,
                    reference: rv.reference,
                }
            }
            other => {
                return Err(Error::Schema(format!(
                    "{}: unknown kind {other:?} (expected numeric or categorical)",
                    rv.name
                )))
            }
        };
        Ok(Variable {
            name: rv.name.clone(),
            label: rv.label.clone(),
            system: rv.system.clone(),
            unit: rv.unit.clone(),
            kind,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Width of the encoded demographic vector: one-hot ethnicity, the
    /// gender flag, then standardized age, height, and weight.
    pub fn demographic_width(&self) -> usize {
        self.demographics.ethnicity_categories + 1 + 3
    }

    /// Hex SHA-256 of the schema text, embedded in artifacts so mismatched
    /// schema/model pairs are caught at load time.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.source.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    /// Human-readable name of an encoded channel.
    pub fn channel_label(&self, channel: usize) -> String {
        assert!(channel < self.layout.width, "channel out of range");
        if channel >= self.layout.mask_offset {
            return format!("{}:mask", self.variables[channel - self.layout.mask_offset].name);
        }
        for (i, v) in self.variables.iter().enumerate() {
            let start = self.layout.value_offset[i];
            let end = start + self.layout.value_width[i];
            if channel >= start && channel < end {
                return match &v.kind {
                    VariableKind::Numeric { .. } => v.name.clone(),
                    VariableKind::Categorical { categories, .. } => {
                        format!("{}={}", v.name, categories[channel - start])
                    }
                };
            }
        }
        unreachable!()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_has_expected_layout() {
        let s = Schema::default_schema();
        assert_eq!(s.n_variables(), 15);
        let layout = s.layout();
        assert_eq!(layout.width, 76);
        assert_eq!(layout.mask_offset, 61);
        assert_eq!(s.demographic_width(), 9);

        let numeric: usize = s.variables().iter().filter(|v| v.is_numeric()).count();
        assert_eq!(numeric, 10);

        // One-hot widths of the score-style variables.
        let widths: Vec<usize> = [
            "capillary_refill_rate",
            "glasgow_coma_scale_eye_opening",
            "glasgow_coma_scale_motor_response",
            "glasgow_coma_scale_total",
            "glasgow_coma_scale_verbal_response",
        ]
        .iter()
        .map(|n| s.variables()[s.variable_index(n).unwrap()].value_width())
        .collect();
        assert_eq!(widths, vec![2, 9, 13, 14, 13]);
    }

    #[test]
    fn default_schema_normals_and_labels() {
        let s = Schema::default_schema();
        let hr = &s.variables()[s.variable_index("heart_rate").unwrap()];
        match hr.kind {
            VariableKind::Numeric { normal, .. } => assert_eq!(normal, 86.0),
            _ => panic!("heart_rate should be numeric"),
        }
        let gcs = &s.variables()[s.variable_index("glasgow_coma_scale_total").unwrap()];
        match &gcs.kind {
            VariableKind::Categorical { categories, normal_index, .. } => {
                assert_eq!(categories[*normal_index], "15");
            }
            _ => panic!("gcs total should be categorical"),
        }
        assert_eq!(s.channel_label(s.layout().mask_offset), "capillary_refill_rate:mask");
        assert_eq!(s.channel_label(0), "capillary_refill_rate=0.0");
    }

    #[test]
    fn unknown_categories_fall_back_to_last_bucket() {
        let s = Schema::default_schema();
        let v = &s.variables()[s.variable_index("glasgow_coma_scale_eye_opening").unwrap()];
        assert_eq!(v.category_index("4 Spontaneously"), 6);
        assert_eq!(v.category_index("made-up"), v.value_width() - 1);
        assert_eq!(v.code_of("To Pain"), 2.0);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = Schema::default_schema();
        let b = Schema::from_toml_str(DEFAULT_SCHEMA_TOML).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let other = DEFAULT_SCHEMA_TOML.replace("86.0", "87.0");
        let c = Schema::from_toml_str(&other).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn malformed_schemas_are_rejected() {
        let missing_normal = r#"
[demographics]
ethnicity_categories = 5
age_normal = 65.0
height_normal = 170.0
weight_normal = 81.0

[[variable]]
name = "x"
label = "X"
kind = "numeric"
system = "circulatory"
"#;
        assert!(matches!(
            Schema::from_toml_str(missing_normal),
            Err(Error::Schema(_))
        ));

        let bad_kind = missing_normal.replace("\"numeric\"", "\"fancy\"");
        assert!(matches!(Schema::from_toml_str(&bad_kind), Err(Error::Schema(_))));
    }
}
