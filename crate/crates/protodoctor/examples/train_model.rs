//! Train a small model end to end and watch the composite objective fall.

use protodoctor::ehr::{encode_dataset, generate, split_by_patient, Standardizer, SyntheticSpec};
use protodoctor::model::{Model, ModelConfig};
use protodoctor::schema::Schema;
use protodoctor::training::{train, TrainConfig};
use protodoctor::Result;

fn main() -> Result<()> {
    let schema = Schema::default_schema();
    let spec = SyntheticSpec {
        n_patients: 70,
        t_hours: 8,
        seed: 5,
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
    let train_raw = pick(&split.train);
    let val_raw = pick(&split.val);

    let st = Standardizer::fit(&schema, &train_raw)?;
    let model_cfg = ModelConfig {
        n_course_prototypes: 6,
        n_cohort_prototypes: 4,
        phys_embed: 6,
        demo_hidden: 8,
        ..ModelConfig::default()
    };
    let mut model = Model::new(&schema, model_cfg, st)?;
    let train_enc = encode_dataset(&schema, &model.standardizer, &train_raw)?;
    let val_enc = encode_dataset(&schema, &model.standardizer, &val_raw)?;

    let train_cfg = TrainConfig {
        max_epochs: 8,
        patience: 4,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let outcome = train(&mut model, &train_enc, &val_enc, &train_cfg)?;

    println!("epoch  train objective  val objective  val cross-entropy");
    for log in &outcome.history {
        println!(
            "{:>5}  {:>15.4}  {:>13.4}  {:>17.4}",
            log.epoch, log.train.total, log.val.total, log.val.cross_entropy
        );
    }
    println!(
        "\nbest epoch {} (val objective {:.4}), stopped early: {}",
        outcome.best_epoch, outcome.best_val_total, outcome.stopped_early
    );

    let last = &outcome.history.last().unwrap().val;
    println!(
        "\nfinal validation terms: ce {:.4}, diversity {:.4}/{:.4}, sparsity {:.4}, forecast {:.4}, adjustment l1 {:.4}",
        last.cross_entropy,
        last.cohort_diversity,
        last.course_diversity,
        last.sparsity,
        last.forecast,
        last.interaction_l1
    );
    Ok(())
}
