//! Turning a trained model into clinician-readable artifacts: prototype
//! projection onto real records, per-admission case reports, and matrix and
//! trajectory exports.
//!
//! Every CSV written here prints floats with the shortest representation
//! that parses back to the identical bits, so downstream tooling can consume
//! the files without precision drift.

use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::ehr::{encode_record, ClinicalRecord, EncodedRecord};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::tensor1;
use crate::schema::{Schema, VariableKind};

// --- prototype projection ----------------------------------------------------

/// Best-matching training moment for one prototype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMatch {
    pub prototype: usize,
    pub admission_id: String,
    /// Hour within the stay; absent for cohort prototypes, which match whole
    /// records.
    pub hour: Option<usize>,
    pub cosine: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub course: Vec<ProjectionMatch>,
    pub cohort: Vec<ProjectionMatch>,
    /// Whether prototype vectors were overwritten with their matches.
    pub pushed: bool,
}

struct Best {
    cosine: f64,
    admission_id: String,
    hour: usize,
    embedding: Array1<f64>,
}

/// Candidate ordering: higher cosine wins; exact ties fall to the lower
/// admission id, then the earlier hour.
fn improves(best: &Option<Best>, cosine: f64, admission_id: &str, hour: usize) -> bool {
    match best {
        None => true,
        Some(b) => {
            cosine > b.cosine
                || (cosine == b.cosine
                    && (admission_id < b.admission_id.as_str()
                        || (admission_id == b.admission_id && hour < b.hour)))
        }
    }
}

/// Ground every prototype in the training set: find the embedding with the
/// highest cosine for each course prototype (any record, any hour) and each
/// cohort prototype (any record). With `push`, prototype vectors are replaced
/// by their matches; reported cosines always refer to the pre-push vectors.
pub fn project_prototypes(
    model: &mut Model,
    records: &[EncodedRecord],
    push: bool,
) -> Result<ProjectionReport> {
    if records.is_empty() {
        return Err(Error::Data("projection needs a non-empty record set".into()));
    }
    let n_course = model.course_bank.len();
    let n_cohort = model.cohort_bank.len();
    let mut best_course: Vec<Option<Best>> = (0..n_course).map(|_| None).collect();
    let mut best_cohort: Vec<Option<Best>> = (0..n_cohort).map(|_| None).collect();

    for rec in records {
        let hourly = model.phys.encode_plain(&model.params, &rec.x);
        for (t, h) in hourly.iter().enumerate() {
            for (k, slot) in best_course.iter_mut().enumerate() {
                let c = model.course_bank.cosine_plain(&model.params, k, h);
                if improves(slot, c, &rec.admission_id, t) {
                    *slot = Some(Best {
                        cosine: c,
                        admission_id: rec.admission_id.clone(),
                        hour: t,
                        embedding: h.clone(),
                    });
                }
            }
        }
        let d = model.demo.encode_plain(&model.params, &rec.d);
        for (m, slot) in best_cohort.iter_mut().enumerate() {
            let c = model.cohort_bank.cosine_plain(&model.params, m, &d);
            if improves(slot, c, &rec.admission_id, 0) {
                *slot = Some(Best {
                    cosine: c,
                    admission_id: rec.admission_id.clone(),
                    hour: 0,
                    embedding: d.clone(),
                });
            }
        }
    }

    let course: Vec<ProjectionMatch> = best_course
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let b = b.as_ref().unwrap();
            ProjectionMatch {
                prototype: k,
                admission_id: b.admission_id.clone(),
                hour: Some(b.hour),
                cosine: b.cosine,
            }
        })
        .collect();
    let cohort: Vec<ProjectionMatch> = best_cohort
        .iter()
        .enumerate()
        .map(|(m, b)| {
            let b = b.as_ref().unwrap();
            ProjectionMatch {
                prototype: m,
                admission_id: b.admission_id.clone(),
                hour: None,
                cosine: b.cosine,
            }
        })
        .collect();

    if push {
        for (k, b) in best_course.iter().enumerate() {
            model
                .course_bank
                .set_prototype(&mut model.params, k, &b.as_ref().unwrap().embedding);
        }
        for (m, b) in best_cohort.iter().enumerate() {
            model
                .cohort_bank
                .set_prototype(&mut model.params, m, &b.as_ref().unwrap().embedding);
        }
    }

    Ok(ProjectionReport { course, cohort, pushed: push })
}

// --- case reports --------------------------------------------------------------

/// One course prototype's row in the risk panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseRow {
    pub prototype: usize,
    pub similarity: f64,
    pub weight: f64,
    /// Cohort-conditioned adjustment added to the weight.
    pub adjustment: f64,
    pub contribution: f64,
}

/// One cohort prototype's row in the demographic panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub prototype: usize,
    pub similarity: f64,
    pub attribution: f64,
    pub weight: f64,
    pub contribution: f64,
}

/// Raw imputed hourly values of one variable. For numeric variables the band
/// is the schema's normal range; categorical variables collapse it to their
/// reference code (a zero-width band drawn as a line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSeries {
    pub variable: String,
    pub label: String,
    pub unit: String,
    pub system: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
}

/// Everything a reviewer needs to audit one prediction: the risk
/// decomposition over course prototypes, the physiological series behind it,
/// and the cohort attribution with its weight adjustments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    pub admission_id: String,
    pub patient_id: String,
    pub label: u8,
    pub prediction: f64,
    pub z_course: f64,
    pub z_cohort: f64,
    pub risk_panel: Vec<CourseRow>,
    pub series_panel: Vec<VariableSeries>,
    pub cohort_panel: Vec<CohortRow>,
}

/// Carry-forward imputation in raw units: numeric values as recorded,
/// categories as their numeric codes, normal values before the first
/// observation.
pub fn variable_series(schema: &Schema, rec: &ClinicalRecord) -> Result<Vec<VariableSeries>> {
    rec.validate(schema)?;
    let mut series: Vec<VariableSeries> = schema
        .variables()
        .iter()
        .map(|v| {
            let (lower, upper) = match &v.kind {
                VariableKind::Numeric { lower, upper, .. } => (*lower, *upper),
                VariableKind::Categorical { reference, .. } => (*reference, *reference),
            };
            VariableSeries {
                variable: v.name.clone(),
                label: v.label.clone(),
                unit: v.unit.clone(),
                system: v.system.clone(),
                lower,
                upper,
                values: Vec::with_capacity(rec.t_hours),
                observed: vec![false; rec.t_hours],
            }
        })
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
                let var = &schema.variables()[idx];
                carried[idx] = Some(match value {
                    crate::ehr::ObservedValue::Numeric(x) => *x,
                    crate::ehr::ObservedValue::Category(s) => var.code_of(s),
                });
                series[idx].observed[t] = true;
            }
        }
        for (v, var) in schema.variables().iter().enumerate() {
            let fallback = match &var.kind {
                VariableKind::Numeric { normal, .. } => *normal,
                VariableKind::Categorical { codes, normal_index, .. } => codes[*normal_index],
            };
            series[v].values.push(carried[v].unwrap_or(fallback));
        }
    }
    Ok(series)
}

pub fn case_report(model: &Model, schema: &Schema, rec: &ClinicalRecord) -> Result<CaseReport> {
    if model.schema_fingerprint != schema.fingerprint() {
        return Err(Error::Schema(
            "model was trained against a different schema".into(),
        ));
    }
    let encoded = encode_record(schema, &model.standardizer, rec)?;
    let fwd = model.forward_plain(&encoded)?;
    let s_course = fwd.trajectory.last().unwrap();
    let w_course = tensor1(&model.params, model.head.w_course);
    let w_cohort = tensor1(&model.params, model.head.w_cohort);

    let risk_panel: Vec<CourseRow> = (0..model.course_bank.len())
        .map(|k| CourseRow {
            prototype: k,
            similarity: s_course[k],
            weight: w_course[k],
            adjustment: fwd.breakdown.adjustments[k],
            contribution: fwd.breakdown.course_contributions[k],
        })
        .collect();
    let cohort_panel: Vec<CohortRow> = (0..model.cohort_bank.len())
        .map(|m| CohortRow {
            prototype: m,
            similarity: fwd.cohort_similarities[m],
            attribution: fwd.cohort_attribution[m],
            weight: w_cohort[m],
            contribution: fwd.breakdown.cohort_contributions[m],
        })
        .collect();

    Ok(CaseReport {
        admission_id: rec.admission_id.clone(),
        patient_id: rec.patient_id.clone(),
        label: rec.label,
        prediction: fwd.breakdown.y_hat,
        z_course: fwd.breakdown.z_course,
        z_cohort: fwd.breakdown.z_cohort,
        risk_panel,
        series_panel: variable_series(schema, rec)?,
        cohort_panel,
    })
}

pub fn write_case_report_json(path: &Path, report: &CaseReport) -> Result<()> {
    use std::io::Write as _;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)
        .map_err(|e| Error::Contract(format!("case report serialization failed: {e}")))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The series panel in long form, one row per variable per hour.
pub fn write_series_csv(path: &Path, series: &[VariableSeries]) -> Result<()> {
    use std::io::Write as _;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "variable,hour,value,observed,lower,upper,unit,system")?;
    for s in series {
        for (t, v) in s.values.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.variable,
                t,
                v,
                u8::from(s.observed[t]),
                write_opt(s.lower),
                write_opt(s.upper),
                s.unit,
                s.system
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Hour-by-hour course similarities in long form.
pub fn write_trajectory_csv(path: &Path, model: &Model, rec: &EncodedRecord) -> Result<()> {
    use std::io::Write as _;
    let fwd = model.forward_plain(rec)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "hour,prototype,similarity")?;
    for (t, sims) in fwd.trajectory.iter().enumerate() {
        for (k, s) in sims.iter().enumerate() {
            writeln!(w, "{t},{k},{s}")?;
        }
    }
    w.flush()?;
    Ok(())
}

// --- interaction matrix export --------------------------------------------------

/// Row/column ordering of an exported interaction matrix, stored alongside
/// the CSV so the heatmap can be reconstructed exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub course_order: Vec<usize>,
    pub course_weights: Vec<f64>,
    pub cohort_order: Vec<usize>,
    pub cohort_weights: Vec<f64>,
}

fn order_by_weight(weights: &Array1<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]));
    order
}

/// Export the cohort-by-course adjustment matrix with rows sorted by course
/// weight and columns by cohort weight, both ascending, so high-risk
/// combinations cluster in one corner. Writes `<path>` and a
/// `<path minus extension>.meta.json` sidecar with the orderings.
pub fn write_interactions_csv(path: &Path, model: &Model) -> Result<InteractionMeta> {
    use std::io::Write as _;
    let w_course = tensor1(&model.params, model.head.w_course);
    let w_cohort = tensor1(&model.params, model.head.w_cohort);
    let matrix = model.params.tensor(model.head.interactions);
    let course_order = order_by_weight(&w_course);
    let cohort_order = order_by_weight(&w_cohort);

    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = std::iter::once("course_prototype".to_string())
        .chain(std::iter::once("w_course".to_string()))
        .chain(cohort_order.iter().map(|m| format!("cohort_{m}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for &k in &course_order {
        let mut row = vec![k.to_string(), w_course[k].to_string()];
        for &m in &cohort_order {
            row.push(matrix[[k, m]].to_string());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;

    let meta = InteractionMeta {
        config_hash: model.config_hash.clone(),
        course_weights: course_order.iter().map(|&k| w_course[k]).collect(),
        cohort_weights: cohort_order.iter().map(|&m| w_cohort[m]).collect(),
        course_order,
        cohort_order,
    };
    write_interaction_meta(&meta_sidecar_path(path), &meta)?;
    Ok(meta)
}

/// Rewrite the ordering sidecar, e.g. after attaching a config hash.
pub fn write_interaction_meta(path: &Path, meta: &InteractionMeta) -> Result<()> {
    use std::io::Write as _;
    let mut mw = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut mw, meta)
        .map_err(|e| Error::Contract(format!("interaction meta serialization failed: {e}")))?;
    writeln!(mw)?;
    mw.flush()?;
    Ok(())
}

fn meta_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn write_projection_json(path: &Path, report: &ProjectionReport) -> Result<()> {
    use std::io::Write as _;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)
        .map_err(|e| Error::Contract(format!("projection report serialization failed: {e}")))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use ndarray::ArrayD;
    use ndarray::IxDyn;

    use super::*;
    use crate::ehr::{encode_dataset, generate, ObservedValue, Standardizer, SyntheticSpec};
    use crate::model::ModelConfig;
    use crate::nn::sigmoid_scalar;

    fn fitted_setup(
        n_patients: usize,
        t_hours: usize,
        seed: u64,
    ) -> (Schema, Vec<ClinicalRecord>, Vec<EncodedRecord>, Model) {
        let schema = Schema::default_schema();
        let spec = SyntheticSpec {
            n_patients,
            max_admissions_per_patient: 1,
            t_hours,
            ..SyntheticSpec::default()
        };
        let (records, _) = generate(&schema, &spec).unwrap();
        let st = Standardizer::fit(&schema, &records).unwrap();
        let encoded = encode_dataset(&schema, &st, &records).unwrap();
        let config = ModelConfig {
            n_course_prototypes: 4,
            n_cohort_prototypes: 3,
            phys_embed: 5,
            demo_hidden: 6,
            init_seed: seed,
            ..ModelConfig::default()
        };
        let model = Model::new(&schema, config, st).unwrap();
        (schema, records, encoded, model)
    }

    #[test]
    fn projection_agrees_with_an_exhaustive_scan() {
        let (_, _, encoded, mut model) = fitted_setup(6, 4, 31);
        let report = project_prototypes(&mut model, &encoded, false).unwrap();

        // Independent scan: enumerate every (record, hour) candidate, then
        // pick by (cosine desc, admission asc, hour asc).
        for k in 0..model.course_bank.len() {
            let mut candidates: Vec<(f64, String, usize)> = Vec::new();
            for rec in &encoded {
                let fwd = model.forward_plain(rec).unwrap();
                for (t, h) in fwd.hourly_embeddings.iter().enumerate() {
                    candidates.push((
                        model.course_bank.cosine_plain(&model.params, k, h),
                        rec.admission_id.clone(),
                        t,
                    ));
                }
            }
            candidates.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then_with(|| a.1.cmp(&b.1))
                    .then_with(|| a.2.cmp(&b.2))
            });
            let expect = &candidates[0];
            let got = &report.course[k];
            assert_eq!(got.admission_id, expect.1);
            assert_eq!(got.hour, Some(expect.2));
            assert_eq!(got.cosine, expect.0);
        }
        assert_eq!(report.cohort.len(), model.cohort_bank.len());
        assert!(!report.pushed);
    }

    #[test]
    fn pushing_grounds_every_prototype_in_a_real_embedding() {
        let (_, _, encoded, mut model) = fitted_setup(6, 4, 37);
        let report = project_prototypes(&mut model, &encoded, true).unwrap();
        assert!(report.pushed);

        // After the push each prototype sits exactly on its matched
        // embedding, so re-projection scores cosine 1 (its own match).
        let after = project_prototypes(&mut model, &encoded, false).unwrap();
        for m in &after.course {
            assert!((m.cosine - 1.0).abs() < 1e-12, "prototype {}: {}", m.prototype, m.cosine);
        }
        for m in &after.cohort {
            assert!((m.cosine - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn case_report_decomposition_is_exact() {
        let (schema, records, _, model) = fitted_setup(5, 4, 41);
        for rec in &records {
            let report = case_report(&model, &schema, rec).unwrap();
            let sum_course: f64 = report.risk_panel.iter().map(|r| r.contribution).sum();
            assert!((sum_course - report.z_course).abs() < 1e-9);
            let sum_cohort: f64 = report.cohort_panel.iter().map(|r| r.contribution).sum();
            assert!((sum_cohort - report.z_cohort).abs() < 1e-9);
            let expect = sigmoid_scalar(report.z_course + report.z_cohort);
            assert!((report.prediction - expect).abs() < 1e-12);
            // Each row's contribution is (weight + adjustment) * similarity.
            for row in &report.risk_panel {
                let expect = (row.weight + row.adjustment) * row.similarity;
                assert!((row.contribution - expect).abs() < 1e-12);
            }
            assert_eq!(report.series_panel.len(), schema.n_variables());
        }
    }

    #[test]
    fn series_imputation_reports_raw_values_and_flags() {
        use std::collections::BTreeMap;
        let schema = Schema::default_schema();
        let mut h1 = BTreeMap::new();
        h1.insert("heart_rate".to_string(), ObservedValue::Numeric(100.0));
        h1.insert(
            "glasgow_coma_scale_total".to_string(),
            ObservedValue::Category("13".into()),
        );
        let rec = ClinicalRecord {
            admission_id: "a1".into(),
            patient_id: "p1".into(),
            demographics: crate::ehr::Demographics {
                ethnicity: 0,
                gender: 1,
                age: Some(60.0),
                height: None,
                weight: None,
            },
            t_hours: 3,
            hours: vec![crate::ehr::HourRow { t: 1, values: h1 }],
            label: 0,
        };
        let series = variable_series(&schema, &rec).unwrap();
        let hr = series
            .iter()
            .find(|s| s.variable == "heart_rate")
            .unwrap();
        // Normal before first observation, then carried raw value.
        assert_eq!(hr.values, vec![86.0, 100.0, 100.0]);
        assert_eq!(hr.observed, vec![false, true, false]);
        assert_eq!((hr.lower, hr.upper), (Some(60.0), Some(100.0)));

        let gcs = series
            .iter()
            .find(|s| s.variable == "glasgow_coma_scale_total")
            .unwrap();
        assert_eq!(gcs.values, vec![15.0, 13.0, 13.0]);
    }

    #[test]
    fn series_csv_round_trips_bit_exactly() {
        let (schema, records, _, _) = fitted_setup(3, 4, 43);
        let series = variable_series(&schema, &records[0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        write_series_csv(&path, &series).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "variable,hour,value,observed,lower,upper,unit,system"
        );
        let mut n = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            let variable = fields[0];
            let hour: usize = fields[1].parse().unwrap();
            let value: f64 = fields[2].parse().unwrap();
            let s = series.iter().find(|s| s.variable == variable).unwrap();
            assert_eq!(value.to_bits(), s.values[hour].to_bits());
            n += 1;
        }
        assert_eq!(n, schema.n_variables() * records[0].t_hours);
    }

    #[test]
    fn interaction_export_sorts_by_weight_and_round_trips() {
        let (_, _, _, mut model) = fitted_setup(3, 3, 47);
        let (n_c, n_d) = (model.head.n_course, model.head.n_cohort);
        let values: Vec<f64> = (0..n_c * n_d)
            .map(|i| (i as f64 * 0.37).sin() / 3.0)
            .collect();
        model
            .params
            .set_tensor(model.head.interactions, &ArrayD::from_shape_vec(IxDyn(&[n_c, n_d]), values).unwrap());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("interactions.csv");
        let meta = write_interactions_csv(&path, &model).unwrap();
        assert!(dir.path().join("interactions.meta.json").exists());

        // Weights appear in ascending order.
        for pair in meta.course_weights.windows(2) {
            assert!(pair[0] <= pair[1]);
        }
        for pair in meta.cohort_weights.windows(2) {
            assert!(pair[0] <= pair[1]);
        }

        // Parse the matrix back and compare bits against the stored tensor.
        let matrix = model.params.tensor(model.head.interactions);
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header[0], "course_prototype");
        assert_eq!(header.len(), 2 + n_d);
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            let k: usize = fields[0].parse().unwrap();
            for (j, &m) in meta.cohort_order.iter().enumerate() {
                let parsed: f64 = fields[2 + j].parse().unwrap();
                assert_eq!(parsed.to_bits(), matrix[[k, m]].to_bits());
            }
        }
    }

    #[test]
    fn trajectory_csv_covers_every_hour_and_prototype() {
        let (_, _, encoded, model) = fitted_setup(3, 4, 53);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        write_trajectory_csv(&path, &model, &encoded[0]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows = text.lines().count() - 1;
        assert_eq!(rows, encoded[0].x.nrows() * model.course_bank.len());
        // Every similarity round-trips and lies in (0, 1).
        let fwd = model.forward_plain(&encoded[0]).unwrap();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let t: usize = fields[0].parse().unwrap();
            let k: usize = fields[1].parse().unwrap();
            let s: f64 = fields[2].parse().unwrap();
            assert_eq!(s.to_bits(), fwd.trajectory[t][k].to_bits());
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn case_report_json_round_trips() {
        let (schema, records, _, model) = fitted_setup(3, 3, 59);
        let report = case_report(&model, &schema, &records[0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("case.json");
        write_case_report_json(&path, &report).unwrap();
        let parsed: CaseReport =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed.admission_id, report.admission_id);
        assert_eq!(parsed.prediction.to_bits(), report.prediction.to_bits());
        assert_eq!(parsed.risk_panel, report.risk_panel);
        assert_eq!(parsed.series_panel, report.series_panel);
    }

    #[test]
    fn mismatched_schema_is_rejected() {
        let (_, records, _, model) = fitted_setup(3, 3, 61);
        let other = Schema::from_toml_str(
            &crate::schema::DEFAULT_SCHEMA_TOML.replace("86.0", "85.0"),
        )
        .unwrap();
        assert!(matches!(
            case_report(&model, &other, &records[0]),
            Err(Error::Schema(_))
        ));
    }
}
