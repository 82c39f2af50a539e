//! Export the cohort-by-course adjustment matrix: how much each demographic
//! cohort shifts the weight of each clinical course, sorted so the
//! highest-risk combinations cluster in one corner.

use protodoctor::ehr::{encode_dataset, generate, split_by_patient, Standardizer, SyntheticSpec};
use protodoctor::interpretation::write_interactions_csv;
use protodoctor::model::{Model, ModelConfig};
use protodoctor::schema::Schema;
use protodoctor::training::{train, TrainConfig};
use protodoctor::Result;

fn main() -> Result<()> {
    let schema = Schema::default_schema();
    // Crank up the interaction signal so the matrix has something to find.
    let spec = SyntheticSpec {
        n_patients: 60,
        t_hours: 6,
        interaction_logit_scale: 3.0,
        seed: 17,
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
        phys_embed: 4,
        demo_hidden: 6,
        ..ModelConfig::default()
    };
    let mut model = Model::new(&schema, model_cfg, st)?;
    let train_enc = encode_dataset(&schema, &model.standardizer, &train_raw)?;
    let val_enc = encode_dataset(&schema, &model.standardizer, &val_raw)?;
    let train_cfg = TrainConfig {
        max_epochs: 6,
        batch_size: 16,
        ..TrainConfig::default()
    };
    train(&mut model, &train_enc, &val_enc, &train_cfg)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("interactions.csv");
    let meta = write_interactions_csv(&path, &model)?;

    println!("course rows, ordered by base weight: {:?}", meta.course_order);
    println!("cohort columns, ordered by base weight: {:?}", meta.cohort_order);
    println!();
    for line in std::fs::read_to_string(&path)?.lines() {
        println!("{line}");
    }
    println!("\nordering sidecar: {}", path.with_extension("meta.json").display());
    Ok(())
}
