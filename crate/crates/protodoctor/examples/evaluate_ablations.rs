//! Train the nested ablation grid (full model, no cohort adjustments,
//! neither adjustments nor forecaster) across seeds and compare test-set
//! discrimination.

use protodoctor::ehr::{encode_dataset, generate, split_by_patient, Standardizer, SyntheticSpec};
use protodoctor::evaluation::{run_experiment, standard_variants, ExperimentData};
use protodoctor::model::ModelConfig;
use protodoctor::schema::Schema;
use protodoctor::training::TrainConfig;
use protodoctor::Result;

fn main() -> Result<()> {
    let schema = Schema::default_schema();
    let spec = SyntheticSpec {
        n_patients: 60,
        t_hours: 6,
        missing_rate: 0.3,
        noise_std: 0.1,
        mixture_blend: 0.15,
        course_logit_scale: 6.0,
        seed: 2,
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
    let train_enc = encode_dataset(&schema, &st, &train_raw)?;
    let val_enc = encode_dataset(&schema, &st, &val_raw)?;
    let test_enc = encode_dataset(&schema, &st, &test_raw)?;

    let model_cfg = ModelConfig {
        n_course_prototypes: 5,
        n_cohort_prototypes: 3,
        phys_embed: 4,
        demo_hidden: 6,
        ..ModelConfig::default()
    };
    let train_cfg = TrainConfig {
        max_epochs: 15,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let data = ExperimentData {
        train: &train_enc,
        val: &val_enc,
        test: &test_enc,
        standardizer: &st,
    };
    let report = run_experiment(
        &schema,
        &model_cfg,
        &train_cfg,
        &standard_variants(),
        &[0, 1],
        &data,
    )?;

    println!("{:<30} {:>4}  {:>17}  {:>17}", "variant", "runs", "auroc", "auprc");
    for s in &report.summaries {
        println!(
            "{:<30} {:>4}  {:>8.4} sd {:.4}  {:>8.4} sd {:.4}",
            s.variant, s.runs, s.auroc_mean, s.auroc_std, s.auprc_mean, s.auprc_std
        );
    }

    println!("\nper-run detail:");
    for r in &report.runs {
        println!(
            "  {:<30} seed {}  auroc {:.4}  auprc {:.4}  ({} epochs, best {})",
            r.variant, r.seed, r.auroc, r.auprc, r.epochs_run, r.best_epoch
        );
    }
    Ok(())
}
