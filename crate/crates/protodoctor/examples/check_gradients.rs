//! Compare analytic gradients with central finite differences over every
//! parameter coordinate of a compact model. Tolerances are per parameter
//! class: recurrent paths accumulate more float error than linear ones.

use protodoctor::ehr::{encode_dataset, generate, Standardizer, SyntheticSpec};
use protodoctor::model::{Model, ModelConfig};
use protodoctor::schema::Schema;
use protodoctor::training::{gradient_check, TrainConfig};
use protodoctor::Result;

fn main() -> Result<()> {
    let schema = Schema::default_schema();
    let spec = SyntheticSpec {
        n_patients: 4,
        max_admissions_per_patient: 1,
        t_hours: 4,
        seed: 9,
        ..SyntheticSpec::default()
    };
    let (records, _) = generate(&schema, &spec)?;
    let st = Standardizer::fit(&schema, &records)?;
    let model_cfg = ModelConfig {
        n_course_prototypes: 3,
        n_cohort_prototypes: 2,
        phys_embed: 4,
        demo_hidden: 6,
        ..ModelConfig::default()
    };
    let mut model = Model::new(&schema, model_cfg, st)?;
    let encoded = encode_dataset(&schema, &model.standardizer, &records)?;

    let entries = gradient_check(&mut model, &encoded, &TrainConfig::default(), 1e-5)?;

    println!("{:<26} {:<10} {:>12} {:>10}", "parameter", "class", "max rel err", "tolerance");
    for e in &entries {
        println!(
            "{:<26} {:<10} {:>12.3e} {:>10.0e}",
            e.name,
            format!("{:?}", e.class).to_lowercase(),
            e.max_relative_error,
            e.tolerance
        );
    }

    let worst = entries
        .iter()
        .max_by(|a, b| {
            (a.max_relative_error / a.tolerance).total_cmp(&(b.max_relative_error / b.tolerance))
        })
        .unwrap();
    println!(
        "\nworst margin: {} at {:.2}% of its tolerance",
        worst.name,
        100.0 * worst.max_relative_error / worst.tolerance
    );
    assert!(entries.iter().all(|e| e.passed()));
    println!("all {} parameter tensors within tolerance", entries.len());
    Ok(())
}
