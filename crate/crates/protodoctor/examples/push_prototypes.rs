//! Prototype projection: snap every learned prototype onto its closest
//! training embedding, so each one names a real stay (and, for courses, a
//! real hour) a clinician can pull up.

use protodoctor::ehr::{encode_dataset, generate, split_by_patient, Standardizer, SyntheticSpec};
use protodoctor::interpretation::project_prototypes;
use protodoctor::model::{Model, ModelConfig};
use protodoctor::schema::Schema;
use protodoctor::training::{train, TrainConfig};
use protodoctor::Result;

fn main() -> Result<()> {
    let schema = Schema::default_schema();
    let spec = SyntheticSpec {
        n_patients: 50,
        t_hours: 8,
        seed: 21,
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
    let (train_raw, val_raw) = (pick(&split.train), pick(&split.val));

    let st = Standardizer::fit(&schema, &train_raw)?;
    let model_cfg = ModelConfig {
        n_course_prototypes: 4,
        n_cohort_prototypes: 3,
        phys_embed: 5,
        demo_hidden: 6,
        ..ModelConfig::default()
    };
    let mut model = Model::new(&schema, model_cfg, st)?;
    let train_enc = encode_dataset(&schema, &model.standardizer, &train_raw)?;
    let val_enc = encode_dataset(&schema, &model.standardizer, &val_raw)?;
    let train_cfg = TrainConfig {
        max_epochs: 4,
        batch_size: 16,
        ..TrainConfig::default()
    };
    train(&mut model, &train_enc, &val_enc, &train_cfg)?;

    let before = project_prototypes(&mut model, &train_enc, false)?;
    println!("closest training embedding per course prototype, before the push:");
    for m in &before.course {
        println!(
            "  prototype {} <- {} hour {:?}, cosine {:.3}",
            m.prototype, m.admission_id, m.hour, m.cosine
        );
    }
    println!("\ncohort prototypes (demographic embeddings have no hour):");
    for m in &before.cohort {
        println!("  prototype {} <- {}, cosine {:.3}", m.prototype, m.admission_id, m.cosine);
    }

    // Overwrite the prototypes with their matches, then re-project.
    project_prototypes(&mut model, &train_enc, true)?;
    let after = project_prototypes(&mut model, &train_enc, false)?;
    for m in after.course.iter().chain(&after.cohort) {
        assert!(m.cosine > 1.0 - 1e-9);
    }
    println!("\nafter the push every prototype IS a training embedding: cosines are all 1");
    Ok(())
}
