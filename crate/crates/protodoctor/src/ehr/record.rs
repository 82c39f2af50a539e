//! In-memory clinical record types and schema validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Schema, VariableKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    /// Ethnicity code; one-hot encoded, must be below the schema's category count.
    pub ethnicity: usize,
    pub gender: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub age: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

/// A recorded value: numeric reading or category string, depending on the
/// variable's kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservedValue {
    Numeric(f64),
    Category(String),
}

/// Observations charted during one hour. Hours with nothing charted are
/// omitted from the record entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourRow {
    pub t: usize,
    pub values: BTreeMap<String, ObservedValue>,
}

/// One ICU stay: identifiers, static demographics, `t_hours` of sparse
/// hourly observations, and the in-hospital mortality label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub admission_id: String,
    pub patient_id: String,
    pub demographics: Demographics,
    pub t_hours: usize,
    pub hours: Vec<HourRow>,
    pub label: u8,
}

impl ClinicalRecord {
    /// Check identifiers, hour ordering, variable names, and value kinds
    /// against a schema.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        let who = &self.admission_id;
        if self.admission_id.is_empty() || self.patient_id.is_empty() {
            return Err(Error::Data("record with empty admission or patient id".into()));
        }
        if self.label > 1 {
            return Err(Error::Data(format!("{who}: label must be 0 or 1")));
        }
        if self.t_hours == 0 {
            return Err(Error::Data(format!("{who}: t_hours must be positive")));
        }
        if self.demographics.ethnicity >= schema.demographics.ethnicity_categories {
            return Err(Error::Data(format!(
                "{who}: ethnicity code {} out of range (schema has {})",
                self.demographics.ethnicity, schema.demographics.ethnicity_categories
            )));
        }
        if self.demographics.gender > 1 {
            return Err(Error::Data(format!("{who}: gender flag must be 0 or 1")));
        }
        let mut last_t: Option<usize> = None;
        for row in &self.hours {
            if row.t >= self.t_hours {
                return Err(Error::Data(format!(
                    "{who}: hour {} outside stay of {} hours",
                    row.t, self.t_hours
                )));
            }
            if let Some(prev) = last_t {
                if row.t <= prev {
                    return Err(Error::Data(format!(
                        "{who}: hours not strictly increasing at t={}",
                        row.t
                    )));
                }
            }
            last_t = Some(row.t);
            for (name, value) in &row.values {
                let idx = schema.variable_index(name).ok_or_else(|| {
                    Error::Data(format!("{who}: unknown variable {name:?}"))
                })?;
                let var = &schema.variables()[idx];
                match (&var.kind, value) {
                    (VariableKind::Numeric { .. }, ObservedValue::Numeric(x)) => {
                        if !x.is_finite() {
                            return Err(Error::Data(format!(
                                "{who}: non-finite value for {name} at t={}",
                                row.t
                            )));
                        }
                    }
                    (VariableKind::Categorical { .. }, ObservedValue::Category(_)) => {}
                    (VariableKind::Numeric { .. }, ObservedValue::Category(_)) => {
                        return Err(Error::Data(format!(
                            "{who}: {name} expects a numeric value, got a category"
                        )));
                    }
                    (VariableKind::Categorical { .. }, ObservedValue::Numeric(_)) => {
                        return Err(Error::Data(format!(
                            "{who}: {name} expects a category, got a number"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Schema;

    fn sample_record() -> ClinicalRecord {
        let mut values = BTreeMap::new();
        values.insert("heart_rate".to_string(), ObservedValue::Numeric(91.0));
        values.insert(
            "glasgow_coma_scale_total".to_string(),
            ObservedValue::Category("14".to_string()),
        );
        ClinicalRecord {
            admission_id: "adm-000001".into(),
            patient_id: "pat-00001".into(),
            demographics: Demographics {
                ethnicity: 2,
                gender: 1,
                age: Some(67.0),
                height: Some(171.0),
                weight: Some(80.0),
            },
            t_hours: 4,
            hours: vec![HourRow { t: 1, values }],
            label: 0,
        }
    }

    #[test]
    fn valid_record_passes() {
        let schema = Schema::default_schema();
        sample_record().validate(&schema).unwrap();
    }

    #[test]
    fn json_round_trip_preserves_value_kinds() {
        let rec = sample_record();
        let text = serde_json::to_string(&rec).unwrap();
        let back: ClinicalRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(rec, back);
        match &back.hours[0].values["glasgow_coma_scale_total"] {
            ObservedValue::Category(s) => assert_eq!(s, "14"),
            _ => panic!("category survived as wrong kind"),
        }
    }

    #[test]
    fn validation_rejects_bad_records() {
        let schema = Schema::default_schema();

        let mut r = sample_record();
        r.hours[0].t = 9;
        assert!(r.validate(&schema).is_err());

        let mut r = sample_record();
        r.hours[0]
            .values
            .insert("lactate".into(), ObservedValue::Numeric(2.0));
        assert!(r.validate(&schema).is_err());

        let mut r = sample_record();
        r.hours[0]
            .values
            .insert("heart_rate".into(), ObservedValue::Category("fast".into()));
        assert!(r.validate(&schema).is_err());

        let mut r = sample_record();
        r.demographics.ethnicity = 5;
        assert!(r.validate(&schema).is_err());

        let mut r = sample_record();
        r.label = 2;
        assert!(r.validate(&schema).is_err());
    }
}
