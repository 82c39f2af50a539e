//! Synthetic ICU cohort generator with planted, recoverable structure.
//!
//! Each record belongs to one demographic cohort (centroid demographics) and
//! mixes a small set of clinical-course archetypes. Numeric physiology is a
//! weighted sum of per-course temporal shapes around each variable's normal
//! value plus Gaussian noise; score-style variables follow a per-course
//! severity trajectory mapped onto their category codes. The mortality label
//! is drawn from a logistic model over the course weights, a per-cohort
//! offset, and a course-by-cohort interaction — the ground truth a trained
//! model should recover. The generator writes that truth alongside each
//! record.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Schema, VariableKind};

use super::record::{ClinicalRecord, Demographics, HourRow, ObservedValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_patients: usize,
    /// Admissions per patient are drawn uniformly from 1..=this.
    pub max_admissions_per_patient: usize,
    pub t_hours: usize,
    pub n_cohorts: usize,
    pub n_courses: usize,
    /// Probability that a variable-hour is left unobserved.
    pub missing_rate: f64,
    /// Noise in units of each variable's deviation scale.
    pub noise_std: f64,
    /// 0 = every record follows exactly one course archetype; 1 = uniform
    /// mixtures. Small values give each record a dominant course.
    pub mixture_blend: f64,
    /// Magnitude of the per-course mortality-logit weights.
    pub course_logit_scale: f64,
    /// Magnitude of the per-cohort offset.
    pub cohort_logit_scale: f64,
    /// Magnitude of the course-by-cohort interaction terms.
    pub interaction_logit_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_patients: 500,
            max_admissions_per_patient: 2,
            t_hours: 24,
            n_cohorts: 3,
            n_courses: 4,
            missing_rate: 0.4,
            noise_std: 0.15,
            mixture_blend: 0.3,
            course_logit_scale: 4.0,
            cohort_logit_scale: 1.0,
            interaction_logit_scale: 1.0,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 || self.max_admissions_per_patient == 0 {
            return Err(Error::Config("generator needs at least one patient and admission".into()));
        }
        if self.t_hours == 0 {
            return Err(Error::Config("t_hours must be positive".into()));
        }
        if self.n_cohorts == 0 || self.n_courses == 0 {
            return Err(Error::Config("need at least one cohort and one course".into()));
        }
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return Err(Error::Config(format!(
                "missing_rate must be in [0,1], got {}",
                self.missing_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.mixture_blend) {
            return Err(Error::Config(format!(
                "mixture_blend must be in [0,1], got {}",
                self.mixture_blend
            )));
        }
        Ok(())
    }
}

/// Ground truth stored for each generated record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub admission_id: String,
    pub cohort: usize,
    pub course_weights: Vec<f64>,
    pub logit: f64,
    pub p: f64,
}

struct CohortProfile {
    dominant_ethnicity: usize,
    gender_p: f64,
    age_mu: f64,
    height_mu: f64,
    weight_mu: f64,
    logit: f64,
}

#[derive(Clone, Copy)]
enum Shape {
    Constant,
    Rising,
    Falling,
    Peak,
}

impl Shape {
    fn eval(self, u: f64) -> f64 {
        match self {
            Shape::Constant => 1.0,
            Shape::Rising => u,
            Shape::Falling => 1.0 - u,
            Shape::Peak => (std::f64::consts::PI * u).sin(),
        }
    }
}

struct NumericPattern {
    amplitude: f64,
    shape: Shape,
}

struct CourseProfile {
    /// One entry per schema variable; numeric variables use the pattern,
    /// categorical ones the severity pair (base, trend).
    numeric: Vec<Option<NumericPattern>>,
    severity_base: Vec<f64>,
    severity_trend: Vec<f64>,
    logit: f64,
}

fn std_normal(rng: &mut ChaCha20Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream simple to reason about.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Deviation scale for a numeric variable: the width of its reference range
/// when known, otherwise a fifth of the normal magnitude.
fn deviation_scale(normal: f64, lower: Option<f64>, upper: Option<f64>) -> f64 {
    match (lower, upper) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => (normal.abs() * 0.2).max(1.0),
    }
}

fn sample_cohorts(schema: &Schema, spec: &SyntheticSpec, rng: &mut ChaCha20Rng) -> Vec<CohortProfile> {
    (0..spec.n_cohorts)
        .map(|c| CohortProfile {
            dominant_ethnicity: c % schema.demographics.ethnicity_categories,
            gender_p: rng.gen_range(0.3..0.7),
            age_mu: rng.gen_range(45.0..80.0),
            height_mu: rng.gen_range(160.0..180.0),
            weight_mu: rng.gen_range(60.0..95.0),
            logit: spec.cohort_logit_scale * rng.gen_range(-1.0..1.0),
        })
        .collect()
}

fn sample_courses(schema: &Schema, spec: &SyntheticSpec, rng: &mut ChaCha20Rng) -> Vec<CourseProfile> {
    (0..spec.n_courses)
        .map(|k| {
            let mut numeric = Vec::with_capacity(schema.n_variables());
            let mut severity_base = Vec::with_capacity(schema.n_variables());
            let mut severity_trend = Vec::with_capacity(schema.n_variables());
            for var in schema.variables() {
                match var.kind {
                    VariableKind::Numeric { .. } => {
                        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        let amplitude = sign * rng.gen_range(0.3..1.0);
                        let shape = match rng.gen_range(0..4) {
                            0 => Shape::Constant,
                            1 => Shape::Rising,
                            2 => Shape::Falling,
                            _ => Shape::Peak,
                        };
                        numeric.push(Some(NumericPattern { amplitude, shape }));
                        severity_base.push(0.0);
                        severity_trend.push(0.0);
                    }
                    VariableKind::Categorical { .. } => {
                        numeric.push(None);
                        severity_base.push(rng.gen_range(0.0..1.0));
                        severity_trend.push(rng.gen_range(-0.5..0.5));
                    }
                }
            }
            // Alternate protective and harmful courses so the planted signal
            // has both directions regardless of course count.
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let logit = spec.course_logit_scale * sign * rng.gen_range(0.8..1.0);
            CourseProfile { numeric, severity_base, severity_trend, logit }
        })
        .collect()
}

/// Mixture over courses with a dominant component: a point mass blended with
/// a uniform-simplex draw.
fn sample_weights(spec: &SyntheticSpec, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let k = spec.n_courses;
    let dominant = rng.gen_range(0..k);
    // Exponential draws normalized give a uniform point on the simplex.
    let mut simplex: Vec<f64> = (0..k)
        .map(|_| -(rng.gen_range(f64::EPSILON..1.0f64).ln()))
        .collect();
    let total: f64 = simplex.iter().sum();
    for w in &mut simplex {
        *w /= total;
    }
    let b = spec.mixture_blend;
    (0..k)
        .map(|i| b * simplex[i] + if i == dominant { 1.0 - b } else { 0.0 })
        .collect()
}

/// Nearest category to a target code; earlier vocabulary entries win ties,
/// so canonical spellings are produced.
fn category_for_code(categories: &[String], codes: &[f64], target: f64) -> String {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in codes.iter().enumerate() {
        let d = (c - target).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    categories[best].clone()
}

pub fn generate(schema: &Schema, spec: &SyntheticSpec) -> Result<(Vec<ClinicalRecord>, Vec<RecordTruth>)> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let cohorts = sample_cohorts(schema, spec, &mut rng);
    let courses = sample_courses(schema, spec, &mut rng);
    let interaction: Vec<Vec<f64>> = (0..spec.n_courses)
        .map(|_| {
            (0..spec.n_cohorts)
                .map(|_| spec.interaction_logit_scale * rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();

    let mut records = Vec::new();
    let mut truths = Vec::new();
    let mut admission_counter = 0usize;

    for p in 0..spec.n_patients {
        let patient_id = format!("pat-{p:05}");
        let cohort_idx = rng.gen_range(0..spec.n_cohorts);
        let cohort = &cohorts[cohort_idx];

        let ethnicity = if rng.gen_bool(0.7) {
            cohort.dominant_ethnicity
        } else {
            rng.gen_range(0..schema.demographics.ethnicity_categories)
        };
        let demographics = Demographics {
            ethnicity,
            gender: u8::from(rng.gen_bool(cohort.gender_p)),
            age: Some((cohort.age_mu + 8.0 * std_normal(&mut rng)).clamp(18.0, 95.0)),
            height: Some((cohort.height_mu + 7.0 * std_normal(&mut rng)).clamp(140.0, 210.0)),
            weight: Some((cohort.weight_mu + 12.0 * std_normal(&mut rng)).clamp(35.0, 200.0)),
        };

        let n_admissions = rng.gen_range(1..=spec.max_admissions_per_patient);
        for _ in 0..n_admissions {
            let admission_id = format!("adm-{admission_counter:06}");
            admission_counter += 1;

            let weights = sample_weights(spec, &mut rng);
            let mut logit = cohort.logit;
            for (k, w) in weights.iter().enumerate() {
                logit += (courses[k].logit + interaction[k][cohort_idx]) * w;
            }
            let prob = sigmoid(logit);
            let label = u8::from(rng.gen_bool(prob));

            let mut hours = Vec::new();
            for t in 0..spec.t_hours {
                let u = if spec.t_hours > 1 {
                    t as f64 / (spec.t_hours - 1) as f64
                } else {
                    0.0
                };
                let mut row = HourRow { t, values: Default::default() };
                for (v, var) in schema.variables().iter().enumerate() {
                    // Draw physiology before the missingness coin so the
                    // underlying trajectory does not depend on what happens
                    // to be observed.
                    let value = match &var.kind {
                        VariableKind::Numeric { normal, lower, upper } => {
                            let dev = deviation_scale(*normal, *lower, *upper);
                            let mut delta = 0.0;
                            for (k, w) in weights.iter().enumerate() {
                                let pat = courses[k].numeric[v].as_ref().unwrap();
                                delta += w * pat.amplitude * pat.shape.eval(u);
                            }
                            delta += spec.noise_std * std_normal(&mut rng);
                            let raw = normal + dev * delta;
                            let lo = normal - 2.5 * dev;
                            let hi = normal + 2.5 * dev;
                            ObservedValue::Numeric(raw.clamp(lo, hi))
                        }
                        VariableKind::Categorical { categories, codes, normal_index, .. } => {
                            let mut sev = 0.0;
                            for (k, w) in weights.iter().enumerate() {
                                sev += w * (courses[k].severity_base[v]
                                    + courses[k].severity_trend[v] * u);
                            }
                            sev += 0.5 * spec.noise_std * std_normal(&mut rng);
                            let sev = sev.clamp(0.0, 1.0);
                            let normal_code = codes[*normal_index];
                            let min = codes.iter().copied().fold(f64::INFINITY, f64::min);
                            let max = codes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                            let worst = if (normal_code - min).abs() >= (normal_code - max).abs() {
                                min
                            } else {
                                max
                            };
                            let target = normal_code + sev * (worst - normal_code);
                            ObservedValue::Category(category_for_code(categories, codes, target))
                        }
                    };
                    if rng.gen_bool(1.0 - spec.missing_rate) {
                        row.values.insert(var.name.clone(), value);
                    }
                }
                if !row.values.is_empty() {
                    hours.push(row);
                }
            }

            records.push(ClinicalRecord {
                admission_id: admission_id.clone(),
                patient_id: patient_id.clone(),
                demographics: demographics.clone(),
                t_hours: spec.t_hours,
                hours,
                label,
            });
            truths.push(RecordTruth {
                admission_id,
                cohort: cohort_idx,
                course_weights: weights,
                logit,
                p: prob,
            });
        }
    }

    Ok((records, truths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Schema;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            n_patients: 120,
            max_admissions_per_patient: 2,
            t_hours: 6,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let schema = Schema::default_schema();
        let spec = small_spec();
        let (r1, t1) = generate(&schema, &spec).unwrap();
        let (r2, t2) = generate(&schema, &spec).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(t1, t2);
        let other = SyntheticSpec { seed: 8, ..small_spec() };
        let (r3, _) = generate(&schema, &other).unwrap();
        assert_ne!(r1, r3);
    }

    #[test]
    fn records_validate_and_match_truths() {
        let schema = Schema::default_schema();
        let (records, truths) = generate(&schema, &small_spec()).unwrap();
        assert_eq!(records.len(), truths.len());
        assert!(records.len() >= 120);
        for (r, t) in records.iter().zip(&truths) {
            r.validate(&schema).unwrap();
            assert_eq!(r.admission_id, t.admission_id);
            let sum: f64 = t.course_weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!((t.p - sigmoid(t.logit)).abs() < 1e-15);
        }
    }

    #[test]
    fn labels_follow_the_planted_logits() {
        let schema = Schema::default_schema();
        let spec = SyntheticSpec {
            n_patients: 1500,
            max_admissions_per_patient: 1,
            t_hours: 4,
            ..SyntheticSpec::default()
        };
        let (records, truths) = generate(&schema, &spec).unwrap();
        let mean_label: f64 =
            records.iter().map(|r| r.label as f64).sum::<f64>() / records.len() as f64;
        let mean_p: f64 = truths.iter().map(|t| t.p).sum::<f64>() / truths.len() as f64;
        assert!((mean_label - mean_p).abs() < 0.05, "{mean_label} vs {mean_p}");

        // Records that died should sit at visibly higher logits.
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (r, t) in records.iter().zip(&truths) {
            if r.label == 1 {
                pos.push(t.logit);
            } else {
                neg.push(t.logit);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&pos) > mean(&neg) + 2.0);
    }

    #[test]
    fn missingness_rate_is_respected() {
        let schema = Schema::default_schema();
        let spec = SyntheticSpec {
            n_patients: 200,
            max_admissions_per_patient: 1,
            t_hours: 8,
            missing_rate: 0.4,
            ..SyntheticSpec::default()
        };
        let (records, _) = generate(&schema, &spec).unwrap();
        let mut observed = 0usize;
        let mut total = 0usize;
        for r in &records {
            total += r.t_hours * schema.n_variables();
            observed += r.hours.iter().map(|h| h.values.len()).sum::<usize>();
        }
        let rate = observed as f64 / total as f64;
        assert!((rate - 0.6).abs() < 0.02, "observed rate {rate}");
    }

    #[test]
    fn generated_categories_use_canonical_spellings() {
        let schema = Schema::default_schema();
        let (records, _) = generate(&schema, &small_spec()).unwrap();
        let gcs_idx = schema.variable_index("glasgow_coma_scale_total").unwrap();
        let var = &schema.variables()[gcs_idx];
        for r in records.iter().take(20) {
            for h in &r.hours {
                if let Some(ObservedValue::Category(s)) = h.values.get(&var.name) {
                    // Never the catch-all bucket.
                    assert_ne!(s, "other");
                    assert!(var.category_index(s) < var.value_width() - 1);
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let schema = Schema::default_schema();
        let bad = SyntheticSpec { missing_rate: 1.5, ..SyntheticSpec::default() };
        assert!(generate(&schema, &bad).is_err());
        let bad = SyntheticSpec { n_cohorts: 0, ..SyntheticSpec::default() };
        assert!(generate(&schema, &bad).is_err());
    }
}
