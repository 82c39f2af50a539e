//! Record encoding: carry-forward imputation, normal-value fallback,
//! standardization, one-hot expansion, and observation masks.
//!
//! Hourly protocol, per variable: an observed value updates the carried
//! state; hours before the first observation take the schema's normal value.
//! Numerics are standardized after imputation using statistics fitted on the
//! training partition only. Each variable also gets a binary mask channel
//! (1 where observed that hour).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Schema, VariableKind};

use super::record::{ClinicalRecord, Demographics, ObservedValue};

/// Per-variable standardization statistics fitted on the training partition.
/// Categorical slots hold the identity transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Age, height, weight.
    pub demo_mean: [f64; 3],
    pub demo_std: [f64; 3],
}

impl Standardizer {
    /// No-op transform (all means 0, stds 1); handy in tests.
    pub fn identity(schema: &Schema) -> Standardizer {
        Standardizer {
            mean: vec![0.0; schema.n_variables()],
            std: vec![1.0; schema.n_variables()],
            demo_mean: [0.0; 3],
            demo_std: [1.0; 3],
        }
    }

    /// Fit means and standard deviations over the imputed hourly values of
    /// the given records (training partition). Variables with no variance
    /// keep a standard deviation of 1 so encoding stays finite.
    pub fn fit(schema: &Schema, records: &[ClinicalRecord]) -> Result<Standardizer> {
        if records.is_empty() {
            return Err(Error::Data("cannot fit standardizer on an empty record set".into()));
        }
        let n_vars = schema.n_variables();
        let mut sum = vec![0.0; n_vars];
        let mut sumsq = vec![0.0; n_vars];
        let mut count = vec![0usize; n_vars];

        for rec in records {
            let imputed = impute_numeric(schema, rec)?;
            for (v, series) in imputed.iter().enumerate() {
                if let Some(series) = series {
                    for &x in series {
                        sum[v] += x;
                        sumsq[v] += x * x;
                        count[v] += 1;
                    }
                }
            }
        }

        let mut mean = vec![0.0; n_vars];
        let mut std = vec![1.0; n_vars];
        for v in 0..n_vars {
            if count[v] == 0 {
                continue;
            }
            let n = count[v] as f64;
            let m = sum[v] / n;
            let var = (sumsq[v] / n - m * m).max(0.0);
            mean[v] = m;
            let s = var.sqrt();
            if s < 1e-12 {
                log::warn!(
                    "variable {} has no variance in the training partition; using std 1",
                    schema.variables()[v].name
                );
                std[v] = 1.0;
            } else {
                std[v] = s;
            }
        }

        let mut demo_mean = [0.0; 3];
        let mut demo_std = [1.0; 3];
        let n = records.len() as f64;
        let fields: Vec<[f64; 3]> = records
            .iter()
            .map(|r| demographic_fields(schema, &r.demographics))
            .collect();
        for j in 0..3 {
            let m = fields.iter().map(|f| f[j]).sum::<f64>() / n;
            let var = (fields.iter().map(|f| (f[j] - m) * (f[j] - m)).sum::<f64>() / n).max(0.0);
            demo_mean[j] = m;
            let s = var.sqrt();
            demo_std[j] = if s < 1e-12 { 1.0 } else { s };
        }

        Ok(Standardizer { mean, std, demo_mean, demo_std })
    }
}

/// A record encoded for the model: hourly channel matrix plus demographic
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRecord {
    pub admission_id: String,
    pub patient_id: String,
    /// t_hours x layout.width
    pub x: Array2<f64>,
    pub d: Array1<f64>,
    pub label: f64,
}

fn demographic_fields(schema: &Schema, d: &Demographics) -> [f64; 3] {
    [
        d.age.unwrap_or(schema.demographics.age_normal),
        d.height.unwrap_or(schema.demographics.height_normal),
        d.weight.unwrap_or(schema.demographics.weight_normal),
    ]
}

/// Carry-forward imputation of the numeric variables only; `None` for
/// categorical slots. Each series has `t_hours` entries.
fn impute_numeric(schema: &Schema, rec: &ClinicalRecord) -> Result<Vec<Option<Vec<f64>>>> {
    rec.validate(schema)?;
    let mut out: Vec<Option<Vec<f64>>> = schema
        .variables()
        .iter()
        .map(|v| v.is_numeric().then(|| Vec::with_capacity(rec.t_hours)))
        .collect();

    let mut carried: Vec<Option<f64>> = vec![None; schema.n_variables()];
    let mut rows = rec.hours.iter().peekable();
    for t in 0..rec.t_hours {
        let row = match rows.peek() {
            Some(r) if r.t == t => Some(rows.next().unwrap()),
            _ => None,
        };
        if let Some(row) = row {
            for (name, value) in &row.values {
                let idx = schema.variable_index(name).unwrap();
                if let ObservedValue::Numeric(x) = value {
                    carried[idx] = Some(*x);
                }
            }
        }
        for (v, var) in schema.variables().iter().enumerate() {
            if let VariableKind::Numeric { normal, .. } = var.kind {
                out[v].as_mut().unwrap().push(carried[v].unwrap_or(normal));
            }
        }
    }
    Ok(out)
}

/// Encode one record against a schema and fitted standardizer.
pub fn encode_record(
    schema: &Schema,
    st: &Standardizer,
    rec: &ClinicalRecord,
) -> Result<EncodedRecord> {
    rec.validate(schema)?;
    if st.mean.len() != schema.n_variables() {
        return Err(Error::Shape(format!(
            "standardizer covers {} variables, schema has {}",
            st.mean.len(),
            schema.n_variables()
        )));
    }
    let layout = schema.layout();
    let mut x = Array2::<f64>::zeros((rec.t_hours, layout.width));

    // Carried state per variable: numeric value or category index.
    enum Carried {
        Numeric(f64),
        Category(usize),
    }
    let mut carried: Vec<Option<Carried>> = (0..schema.n_variables()).map(|_| None).collect();

    let mut rows = rec.hours.iter().peekable();
    for t in 0..rec.t_hours {
        let row = match rows.peek() {
            Some(r) if r.t == t => Some(rows.next().unwrap()),
            _ => None,
        };
        if let Some(row) = row {
            for (name, value) in &row.values {
                let idx = schema.variable_index(name).unwrap();
                let var = &schema.variables()[idx];
                carried[idx] = Some(match value {
                    ObservedValue::Numeric(v) => Carried::Numeric(*v),
                    ObservedValue::Category(s) => Carried::Category(var.category_index(s)),
                });
                x[[t, layout.mask_offset + idx]] = 1.0;
            }
        }
        for (v, var) in schema.variables().iter().enumerate() {
            let off = layout.value_offset[v];
            match &var.kind {
                VariableKind::Numeric { normal, .. } => {
                    let raw = match carried[v] {
                        Some(Carried::Numeric(x)) => x,
                        _ => *normal,
                    };
                    x[[t, off]] = (raw - st.mean[v]) / st.std[v];
                }
                VariableKind::Categorical { normal_index, .. } => {
                    let idx = match carried[v] {
                        Some(Carried::Category(i)) => i,
                        _ => *normal_index,
                    };
                    x[[t, off + idx]] = 1.0;
                }
            }
        }
    }

    Ok(EncodedRecord {
        admission_id: rec.admission_id.clone(),
        patient_id: rec.patient_id.clone(),
        x,
        d: encode_demographics(schema, st, &rec.demographics),
        label: rec.label as f64,
    })
}

/// Demographic vector: one-hot ethnicity, gender flag, standardized
/// age/height/weight.
pub fn encode_demographics(schema: &Schema, st: &Standardizer, d: &Demographics) -> Array1<f64> {
    let eth = schema.demographics.ethnicity_categories;
    let mut out = Array1::<f64>::zeros(schema.demographic_width());
    out[d.ethnicity] = 1.0;
    out[eth] = d.gender as f64;
    let fields = demographic_fields(schema, d);
    for j in 0..3 {
        out[eth + 1 + j] = (fields[j] - st.demo_mean[j]) / st.demo_std[j];
    }
    out
}

/// Encode a whole set of records with shared statistics.
pub fn encode_dataset(
    schema: &Schema,
    st: &Standardizer,
    records: &[ClinicalRecord],
) -> Result<Vec<EncodedRecord>> {
    records.iter().map(|r| encode_record(schema, st, r)).collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::ehr::record::{Demographics, HourRow};
    use crate::schema::Schema;

    /// Two-variable schema small enough to verify channels by hand.
    fn tiny_schema() -> Schema {
        Schema::from_toml_str(
            r#"
[demographics]
ethnicity_categories = 3
age_normal = 60.0
height_normal = 170.0
weight_normal = 80.0

[[variable]]
name = "hr"
label = "Heart rate"
kind = "numeric"
system = "circulatory"
unit = "bpm"
normal_value = 80.0

[[variable]]
name = "level"
label = "Level"
kind = "categorical"
system = "neurological"
normal_category = "good"
categories = ["bad", "good", "other"]
codes = [0.0, 1.0, 1.0]
"#,
        )
        .unwrap()
    }

    fn rec(hours: Vec<(usize, Vec<(&str, ObservedValue)>)>, t_hours: usize) -> ClinicalRecord {
        ClinicalRecord {
            admission_id: "a1".into(),
            patient_id: "p1".into(),
            demographics: Demographics {
                ethnicity: 1,
                gender: 1,
                age: Some(70.0),
                height: None,
                weight: Some(90.0),
            },
            t_hours,
            hours: hours
                .into_iter()
                .map(|(t, vs)| HourRow {
                    t,
                    values: vs.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>(),
                })
                .collect(),
            label: 1,
        }
    }

    #[test]
    fn carry_forward_and_normal_fallback() {
        // hr observed at t=1 (100) and t=3 (120); layout: hr, level one-hot
        // (3), masks hr, level.
        let schema = tiny_schema();
        let st = Standardizer::identity(&schema);
        let r = rec(
            vec![
                (1, vec![("hr", ObservedValue::Numeric(100.0))]),
                (3, vec![("hr", ObservedValue::Numeric(120.0))]),
            ],
            5,
        );
        let e = encode_record(&schema, &st, &r).unwrap();
        assert_eq!(e.x.dim(), (5, 6));
        let hr: Vec<f64> = (0..5).map(|t| e.x[[t, 0]]).collect();
        assert_eq!(hr, vec![80.0, 100.0, 100.0, 120.0, 120.0]);
        let hr_mask: Vec<f64> = (0..5).map(|t| e.x[[t, 4]]).collect();
        assert_eq!(hr_mask, vec![0.0, 1.0, 0.0, 1.0, 0.0]);
        // level never observed: one-hot stays on the normal category.
        for t in 0..5 {
            assert_eq!(e.x[[t, 1]], 0.0);
            assert_eq!(e.x[[t, 2]], 1.0);
            assert_eq!(e.x[[t, 3]], 0.0);
            assert_eq!(e.x[[t, 5]], 0.0);
        }
        assert_eq!(e.label, 1.0);
    }

    #[test]
    fn categorical_carry_forward() {
        let schema = tiny_schema();
        let st = Standardizer::identity(&schema);
        let r = rec(
            vec![(1, vec![("level", ObservedValue::Category("bad".into()))])],
            3,
        );
        let e = encode_record(&schema, &st, &r).unwrap();
        // t=0 normal ("good"), t=1 and t=2 carried "bad".
        assert_eq!(e.x[[0, 2]], 1.0);
        assert_eq!(e.x[[1, 1]], 1.0);
        assert_eq!(e.x[[2, 1]], 1.0);
        assert_eq!(e.x[[1, 5]], 1.0);
        assert_eq!(e.x[[2, 5]], 0.0);
    }

    #[test]
    fn standardizer_statistics_match_hand_computation() {
        let schema = tiny_schema();
        // Record 1: hr 100 at t=0, T=2 -> imputed [100, 100].
        // Record 2: hr 120 at t=0, T=2 -> imputed [120, 120].
        let r1 = rec(vec![(0, vec![("hr", ObservedValue::Numeric(100.0))])], 2);
        let mut r2 = rec(vec![(0, vec![("hr", ObservedValue::Numeric(120.0))])], 2);
        r2.admission_id = "a2".into();
        let st = Standardizer::fit(&schema, &[r1.clone(), r2]).unwrap();
        assert_eq!(st.mean[0], 110.0);
        assert_eq!(st.std[0], 10.0);
        // Categorical slot is identity.
        assert_eq!(st.mean[1], 0.0);
        assert_eq!(st.std[1], 1.0);

        let e = encode_record(&schema, &st, &r1).unwrap();
        assert_eq!(e.x[[0, 0]], -1.0);
    }

    #[test]
    fn constant_variable_keeps_unit_std() {
        let schema = tiny_schema();
        let r1 = rec(vec![(0, vec![("hr", ObservedValue::Numeric(80.0))])], 2);
        let st = Standardizer::fit(&schema, &[r1]).unwrap();
        assert_eq!(st.std[0], 1.0);
        assert_eq!(st.mean[0], 80.0);
    }

    #[test]
    fn demographic_vector_layout() {
        let schema = tiny_schema();
        let st = Standardizer::identity(&schema);
        let r = rec(vec![], 1);
        let e = encode_record(&schema, &st, &r).unwrap();
        // one-hot ethnicity(3), gender, age, height(normal fallback), weight
        assert_eq!(e.d.len(), 7);
        assert_eq!(e.d.to_vec(), vec![0.0, 1.0, 0.0, 1.0, 70.0, 170.0, 90.0]);
    }

    #[test]
    fn default_schema_round_trip_width() {
        let schema = Schema::default_schema();
        let st = Standardizer::identity(&schema);
        let mut values = BTreeMap::new();
        values.insert("heart_rate".into(), ObservedValue::Numeric(95.0));
        values.insert(
            "glasgow_coma_scale_eye_opening".into(),
            ObservedValue::Category("To Pain".into()),
        );
        let r = ClinicalRecord {
            admission_id: "a".into(),
            patient_id: "p".into(),
            demographics: Demographics {
                ethnicity: 0,
                gender: 0,
                age: Some(50.0),
                height: Some(160.0),
                weight: Some(70.0),
            },
            t_hours: 2,
            hours: vec![HourRow { t: 0, values }],
            label: 0,
        };
        let e = encode_record(&schema, &st, &r).unwrap();
        assert_eq!(e.x.dim(), (2, 76));
        assert_eq!(e.d.len(), 9);
        // "To Pain" shares a one-hot slot with nothing else; find it lit.
        let vidx = schema.variable_index("glasgow_coma_scale_eye_opening").unwrap();
        let var = &schema.variables()[vidx];
        let off = schema.layout().value_offset[vidx];
        let slot = off + var.category_index("To Pain");
        assert_eq!(e.x[[0, slot]], 1.0);
        assert_eq!(e.x[[1, slot]], 1.0); // carried forward
        // each hour has exactly one lit slot per categorical variable
        let w = var.value_width();
        let lit: f64 = (0..w).map(|j| e.x[[0, off + j]]).sum();
        assert_eq!(lit, 1.0);
    }
}
