//! Build the three-panel case report for one test admission: risk
//! decomposition over course prototypes, observed variable courses with
//! normal bands, and the cohort assignment.

use protodoctor::ehr::{encode_dataset, generate, split_by_patient, Standardizer, SyntheticSpec};
use protodoctor::interpretation::case_report;
use protodoctor::model::{Model, ModelConfig};
use protodoctor::schema::Schema;
use protodoctor::training::{train, TrainConfig};
use protodoctor::Result;

fn main() -> Result<()> {
    let schema = Schema::default_schema();
    let spec = SyntheticSpec {
        n_patients: 60,
        t_hours: 8,
        seed: 13,
        ..SyntheticSpec::default()
    };
    let (records, _) = generate(&schema, &spec)?;
    let split = split_by_patient(&records, (0.7, 0.15, 0.15), 0)?;
    let pick = |ids: &[String]| -> Vec<_> {
        records
            .iter()
            .filter(|r| ids.contains(&r.admission_id))
            .cloned()
            .collect()
    };
    let (train_raw, val_raw, test_raw) = (pick(&split.train), pick(&split.val), pick(&split.test));

    let st = Standardizer::fit(&schema, &train_raw)?;
    let model_cfg = ModelConfig {
        n_course_prototypes: 5,
        n_cohort_prototypes: 3,
        phys_embed: 5,
        demo_hidden: 6,
        ..ModelConfig::default()
    };
    let mut model = Model::new(&schema, model_cfg, st)?;
    let train_enc = encode_dataset(&schema, &model.standardizer, &train_raw)?;
    let val_enc = encode_dataset(&schema, &model.standardizer, &val_raw)?;
    let train_cfg = TrainConfig {
        max_epochs: 5,
        batch_size: 16,
        ..TrainConfig::default()
    };
    train(&mut model, &train_enc, &val_enc, &train_cfg)?;

    let rec = &test_raw[0];
    let report = case_report(&model, &schema, rec)?;

    println!(
        "admission {} (patient {}), outcome {}",
        report.admission_id, report.patient_id, report.label
    );
    println!(
        "predicted risk {:.4} = sigmoid({:+.4} course + {:+.4} cohort)",
        report.prediction, report.z_course, report.z_cohort
    );

    // Panel 1: which clinical courses drive the logit, and by how much.
    let mut rows = report.risk_panel.clone();
    rows.sort_by(|a, b| b.contribution.abs().total_cmp(&a.contribution.abs()));
    println!("\ncourse prototypes by |contribution|:");
    for row in &rows {
        println!(
            "  prototype {:<2} similarity {:.3} x (weight {:+.3} + adjustment {:+.3}) = {:+.4}",
            row.prototype, row.similarity, row.weight, row.adjustment, row.contribution
        );
    }

    // Panel 3: the sparse softmax concentrates the mass on one cohort.
    let best = report
        .cohort_panel
        .iter()
        .max_by(|a, b| a.attribution.total_cmp(&b.attribution))
        .unwrap();
    println!(
        "\ncohort attribution: prototype {} holds {:.6} of the mass (similarity {:.3})",
        best.prototype, best.attribution, best.similarity
    );

    // Panel 2: one variable's course with its normal band; unobserved hours
    // carry the last value forward.
    let hr = report
        .series_panel
        .iter()
        .find(|s| s.variable == "heart_rate")
        .unwrap();
    let (lo, hi) = (hr.lower.unwrap_or(f64::NAN), hr.upper.unwrap_or(f64::NAN));
    println!("\n{} ({}), normal band {lo}..{hi}:", hr.label, hr.unit);
    for (t, (value, observed)) in hr.values.iter().zip(&hr.observed).enumerate() {
        let source = if *observed { "charted" } else { "carried" };
        println!("  t={t:<2} {value:>6.1} ({source})");
    }
    Ok(())
}
