//! Command-line pipeline around the library.
//!
//! Every subcommand works inside one workspace directory (`--out`): it reads
//! the artifacts earlier stages wrote there and adds its own. All randomness
//! is seeded, so rerunning a stage with the same inputs and configuration
//! reproduces its outputs byte for byte; wall-clock timestamps appear only in
//! `.meta.json` sidecars. Every artifact names the SHA-256 of the resolved
//! configuration that produced it, either in an embedded `config_hash` field
//! or in its sidecar.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::AppConfig;
use crate::ehr::jsonl::{self, ArtifactMeta};
use crate::ehr::{
    encode_dataset, encode_record, generate, split_by_patient, ClinicalRecord, DatasetSplit,
    Standardizer,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_model, predict_all, run_experiment, standard_variants, write_predictions_csv,
    write_summary_csv, ExperimentData, VariantSpec,
};
use crate::interpretation::{
    case_report, project_prototypes, variable_series, write_interactions_csv, write_series_csv,
    write_trajectory_csv,
};
use crate::model::Model;
use crate::schema::Schema;
use crate::training::{gradient_check, train, write_history_csv, GradCheckEntry};

const RESOLVED_CONFIG: &str = "config.resolved.toml";
const RECORDS: &str = "records.jsonl";
const TRUTHS: &str = "truths.jsonl";
const SPLIT: &str = "split.json";
const STANDARDIZER: &str = "standardizer.json";
const MODEL: &str = "model.pdma";
const PUSHED_MODEL: &str = "model.pushed.pdma";
const HISTORY: &str = "history.csv";
const TRAINING: &str = "training.json";
const METRICS: &str = "metrics.json";
const PREDICTIONS: &str = "predictions.csv";
const EXPERIMENT: &str = "experiment.json";
const SUMMARY: &str = "summary.csv";
const PROJECTION: &str = "projection.json";
const INTERACTIONS: &str = "interactions.csv";
const GRADCHECK: &str = "gradcheck.json";

/// Interpretable prototype-based ICU mortality prediction.
#[derive(Debug, Parser)]
#[command(name = "protodoctor", version, about)]
pub struct Cli {
    /// Run configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Workspace directory that artifacts are read from and written to.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,

    /// Override every stage seed (generation, split, initialization, batch order).
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<u64>,

    /// Observation horizon in hours.
    #[arg(long = "T", global = true, value_name = "HOURS", value_parser = parse_horizon)]
    pub horizon: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_horizon(s: &str) -> std::result::Result<usize, String> {
    match s {
        "24" => Ok(24),
        "48" => Ok(48),
        _ => Err("supported horizons are 24 and 48".into()),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort: clinical records plus outcome ground truth.
    GenData,
    /// Partition admissions into train/val/test, keeping each patient in one partition.
    Split,
    /// Fit per-channel standardization statistics on the training partition.
    Preprocess,
    /// Train on the training partition with early stopping on validation loss.
    Train {
        /// Train the trajectory forecaster alongside the predictor.
        #[arg(long = "enable-par", value_name = "BOOL", num_args = 0..=1,
              default_missing_value = "true", action = clap::ArgAction::Set)]
        enable_par: Option<bool>,
        /// Learn per-cohort adjustments to the course prototype weights.
        #[arg(long = "enable-dci", value_name = "BOOL", num_args = 0..=1,
              default_missing_value = "true", action = clap::ArgAction::Set)]
        enable_dci: Option<bool>,
    },
    /// Score the archived model on the test partition, or train and score an
    /// ablation grid with --runs.
    Eval {
        /// Train every variant once per seed, over this many seeds.
        #[arg(long, value_name = "N")]
        runs: Option<usize>,
    },
    /// Case-level reports: risk decomposition, variable courses, cohort match.
    Interpret {
        /// Admission to report on.
        #[arg(long, value_name = "ADMISSION")]
        record: Option<String>,
        /// First replace every prototype by its closest training embedding.
        #[arg(long)]
        push_prototypes: bool,
    },
    /// Export the cohort-by-course weight-adjustment matrix as CSV.
    ExportInteractions,
    /// Compare analytic gradients with finite differences on a compact model.
    Gradcheck,
}

/// Parse the process arguments and run the selected subcommand.
pub fn run() -> Result<()> {
    run_with(Cli::parse())
}

/// Run an already-parsed invocation; used directly by tests.
pub fn run_with(cli: Cli) -> Result<()> {
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    if let Some(t) = cli.horizon {
        cfg.data.synthetic.t_hours = t;
    }
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Command::Train { enable_par, enable_dci } = &cli.command {
        if let Some(b) = *enable_par {
            cfg.model.enable_forecast = b;
        }
        if let Some(b) = *enable_dci {
            cfg.model.enable_interactions = b;
        }
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Ctx {
        hash: cfg.hash(),
        schema: cfg.load_schema()?,
        out: cli.out.clone(),
        seed_override: cli.seed,
        cfg,
    };
    // Resolved config of the latest invocation, so a run can be reproduced
    // from its output directory alone.
    ctx.cfg.save_resolved(&ctx.path(RESOLVED_CONFIG))?;
    match &cli.command {
        Command::GenData => cmd_gen_data(&ctx),
        Command::Split => cmd_split(&ctx),
        Command::Preprocess => cmd_preprocess(&ctx),
        Command::Train { .. } => cmd_train(&ctx),
        Command::Eval { runs } => cmd_eval(&ctx, *runs),
        Command::Interpret { record, push_prototypes } => {
            cmd_interpret(&ctx, record.as_deref(), *push_prototypes)
        }
        Command::ExportInteractions => cmd_export_interactions(&ctx),
        Command::Gradcheck => cmd_gradcheck(&ctx),
    }
}

struct Ctx {
    cfg: AppConfig,
    hash: String,
    schema: Schema,
    out: PathBuf,
    seed_override: Option<u64>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn read_records(&self) -> Result<Vec<ClinicalRecord>> {
        let p = self.path(RECORDS);
        require(&p, "gen-data")?;
        jsonl::read_records(&p, &self.schema)
    }

    /// Load the stored split, or derive and store it when absent. Both paths
    /// produce the same partition for the same records and seed.
    fn ensure_split(&self, records: &[ClinicalRecord]) -> Result<DatasetSplit> {
        let p = self.path(SPLIT);
        if p.exists() {
            return DatasetSplit::load(&p);
        }
        log::info!("{} not found; deriving the split", p.display());
        let split = split_by_patient(records, self.cfg.split_fractions(), self.cfg.data.split_seed)?;
        write_stamped_json(&p, &self.hash, &split)?;
        Ok(split)
    }

    /// Load the stored standardizer, or fit and store one when absent.
    fn ensure_standardizer(&self, train_recs: &[ClinicalRecord]) -> Result<Standardizer> {
        let p = self.path(STANDARDIZER);
        if p.exists() {
            let text = std::fs::read_to_string(&p)?;
            return serde_json::from_str(&text)
                .map_err(|e| Error::Data(format!("{}: {e}", p.display())));
        }
        log::info!("{} not found; fitting statistics", p.display());
        let st = Standardizer::fit(&self.schema, train_recs)?;
        write_stamped_json(&p, &self.hash, &st)?;
        Ok(st)
    }

    fn load_model(&self) -> Result<Model> {
        let p = self.path(MODEL);
        require(&p, "train")?;
        Model::load(&p, &self.schema)
    }

    /// Timestamped provenance sidecar for a CSV artifact.
    fn csv_meta(&self, data_path: &Path, n_rows: usize) -> Result<()> {
        ArtifactMeta::new(&self.schema, n_rows)
            .with_config_hash(&self.hash)
            .save(&jsonl::meta_path(data_path))
    }
}

fn require(path: &Path, produced_by: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "{} not found; run `{produced_by}` first",
            path.display()
        )))
    }
}

/// A JSON artifact with the resolved-configuration hash spliced in at the
/// top level.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn write_stamped_json<T: Serialize>(path: &Path, hash: &str, body: &T) -> Result<()> {
    use std::io::Write as _;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &Stamped { config_hash: hash, body })
        .map_err(|e| Error::Contract(format!("{}: serialization failed: {e}", path.display())))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Clone records into their partitions. Every admission must be covered by
/// the split, otherwise the split belongs to a different dataset.
#[allow(clippy::type_complexity)]
fn partition(
    records: &[ClinicalRecord],
    split: &DatasetSplit,
) -> Result<(Vec<ClinicalRecord>, Vec<ClinicalRecord>, Vec<ClinicalRecord>)> {
    let mut assignment: HashMap<&str, u8> = HashMap::new();
    for id in &split.train {
        assignment.insert(id.as_str(), 0);
    }
    for id in &split.val {
        assignment.insert(id.as_str(), 1);
    }
    for id in &split.test {
        assignment.insert(id.as_str(), 2);
    }
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    for rec in records {
        match assignment.get(rec.admission_id.as_str()) {
            Some(0) => out.0.push(rec.clone()),
            Some(1) => out.1.push(rec.clone()),
            Some(2) => out.2.push(rec.clone()),
            _ => {
                return Err(Error::Data(format!(
                    "admission {} is not covered by the split; re-run `split`",
                    rec.admission_id
                )))
            }
        }
    }
    Ok(out)
}

fn cmd_gen_data(ctx: &Ctx) -> Result<()> {
    let (records, truths) = generate(&ctx.schema, &ctx.cfg.data.synthetic)?;
    let records_path = ctx.path(RECORDS);
    jsonl::write_records(&records_path, &records)?;
    ArtifactMeta::new(&ctx.schema, records.len())
        .with_config_hash(&ctx.hash)
        .with_extra("t_hours", json!(ctx.cfg.data.synthetic.t_hours))
        .save(&jsonl::meta_path(&records_path))?;
    let truths_path = ctx.path(TRUTHS);
    jsonl::write_truths(&truths_path, &truths)?;
    ArtifactMeta::new(&ctx.schema, truths.len())
        .with_config_hash(&ctx.hash)
        .save(&jsonl::meta_path(&truths_path))?;
    let deceased = records.iter().filter(|r| r.label == 1).count();
    println!(
        "generated {} admissions ({deceased} deceased) over {} hours -> {}",
        records.len(),
        ctx.cfg.data.synthetic.t_hours,
        records_path.display()
    );
    Ok(())
}

fn cmd_split(ctx: &Ctx) -> Result<()> {
    let records = ctx.read_records()?;
    let split = split_by_patient(&records, ctx.cfg.split_fractions(), ctx.cfg.data.split_seed)?;
    let path = ctx.path(SPLIT);
    write_stamped_json(&path, &ctx.hash, &split)?;
    println!(
        "split {} admissions into {}/{}/{} train/val/test -> {}",
        records.len(),
        split.train.len(),
        split.val.len(),
        split.test.len(),
        path.display()
    );
    Ok(())
}

fn cmd_preprocess(ctx: &Ctx) -> Result<()> {
    let records = ctx.read_records()?;
    let split = ctx.ensure_split(&records)?;
    let (train_recs, _, _) = partition(&records, &split)?;
    let st = Standardizer::fit(&ctx.schema, &train_recs)?;
    let path = ctx.path(STANDARDIZER);
    write_stamped_json(&path, &ctx.hash, &st)?;
    println!(
        "fit standardization statistics on {} training admissions -> {}",
        train_recs.len(),
        path.display()
    );
    Ok(())
}

fn cmd_train(ctx: &Ctx) -> Result<()> {
    let records = ctx.read_records()?;
    let split = ctx.ensure_split(&records)?;
    let (train_recs, val_recs, _) = partition(&records, &split)?;
    let st = ctx.ensure_standardizer(&train_recs)?;
    let mut model = Model::new(&ctx.schema, ctx.cfg.model.clone(), st)?;
    model.config_hash = Some(ctx.hash.clone());
    let train_enc = encode_dataset(&ctx.schema, &model.standardizer, &train_recs)?;
    let val_enc = encode_dataset(&ctx.schema, &model.standardizer, &val_recs)?;
    let outcome = train(&mut model, &train_enc, &val_enc, &ctx.cfg.train)?;
    let model_path = ctx.path(MODEL);
    model.save(&model_path)?;
    let history_path = ctx.path(HISTORY);
    write_history_csv(&history_path, &outcome.history)?;
    ctx.csv_meta(&history_path, outcome.history.len())?;
    write_stamped_json(&ctx.path(TRAINING), &ctx.hash, &outcome)?;
    println!(
        "trained for {} epochs (best validation objective {:.6} at epoch {}) -> {}",
        outcome.epochs_run,
        outcome.best_val_total,
        outcome.best_epoch,
        model_path.display()
    );
    Ok(())
}

fn cmd_eval(ctx: &Ctx, runs: Option<usize>) -> Result<()> {
    let records = ctx.read_records()?;
    let split = ctx.ensure_split(&records)?;
    let (train_recs, val_recs, test_recs) = partition(&records, &split)?;
    match runs {
        None => {
            let model = ctx.load_model()?;
            let test_enc = encode_dataset(&ctx.schema, &model.standardizer, &test_recs)?;
            let (scores, _) = predict_all(&model, &test_enc)?;
            let metrics = evaluate_model(&model, &test_enc)?;
            let metrics_path = ctx.path(METRICS);
            write_stamped_json(&metrics_path, &ctx.hash, &metrics)?;
            let pred_path = ctx.path(PREDICTIONS);
            write_predictions_csv(&pred_path, &test_enc, &scores)?;
            ctx.csv_meta(&pred_path, test_enc.len())?;
            println!(
                "test auroc {:.4}, auprc {:.4} over {} admissions ({} deceased) -> {}",
                metrics.auroc,
                metrics.auprc,
                metrics.n,
                metrics.n_positive,
                metrics_path.display()
            );
        }
        Some(n) => {
            if n == 0 {
                return Err(Error::Config("--runs must be at least 1".into()));
            }
            let st = ctx.ensure_standardizer(&train_recs)?;
            let train_enc = encode_dataset(&ctx.schema, &st, &train_recs)?;
            let val_enc = encode_dataset(&ctx.schema, &st, &val_recs)?;
            let test_enc = encode_dataset(&ctx.schema, &st, &test_recs)?;
            let variants = if ctx.cfg.eval.all_variants {
                standard_variants()
            } else {
                vec![VariantSpec {
                    name: "configured".into(),
                    enable_interactions: ctx.cfg.model.enable_interactions,
                    enable_forecast: ctx.cfg.model.enable_forecast,
                }]
            };
            let seeds = grid_seeds(ctx, n);
            let data = ExperimentData {
                train: &train_enc,
                val: &val_enc,
                test: &test_enc,
                standardizer: &st,
            };
            let report =
                run_experiment(&ctx.schema, &ctx.cfg.model, &ctx.cfg.train, &variants, &seeds, &data)?;
            write_stamped_json(&ctx.path(EXPERIMENT), &ctx.hash, &report)?;
            let summary_path = ctx.path(SUMMARY);
            write_summary_csv(&summary_path, &report.summaries)?;
            ctx.csv_meta(&summary_path, report.summaries.len())?;
            for s in &report.summaries {
                println!(
                    "variant {}: auroc {:.4} (sd {:.4}), auprc {:.4} (sd {:.4}) over {} runs",
                    s.variant, s.auroc_mean, s.auroc_std, s.auprc_mean, s.auprc_std, s.runs
                );
            }
        }
    }
    Ok(())
}

/// Seeds for an ablation grid: an explicit `--seed S` yields S, S+1, ...;
/// otherwise the configured seed list, extended with consecutive values when
/// more runs are asked for than the list holds.
fn grid_seeds(ctx: &Ctx, runs: usize) -> Vec<u64> {
    if let Some(s) = ctx.seed_override {
        return (0..runs as u64).map(|i| s + i).collect();
    }
    let mut seeds: Vec<u64> = ctx.cfg.eval.seeds.iter().copied().take(runs).collect();
    let mut next = seeds.iter().copied().max().map_or(0, |m| m + 1);
    while seeds.len() < runs {
        seeds.push(next);
        next += 1;
    }
    seeds
}

fn cmd_interpret(ctx: &Ctx, record: Option<&str>, push: bool) -> Result<()> {
    if record.is_none() && !push {
        return Err(Error::Config(
            "interpret needs --record <admission> and/or --push-prototypes".into(),
        ));
    }
    let mut model = ctx.load_model()?;
    let records = ctx.read_records()?;
    if push {
        let split = ctx.ensure_split(&records)?;
        let (train_recs, _, _) = partition(&records, &split)?;
        let train_enc = encode_dataset(&ctx.schema, &model.standardizer, &train_recs)?;
        let report = project_prototypes(&mut model, &train_enc, true)?;
        write_stamped_json(&ctx.path(PROJECTION), &ctx.hash, &report)?;
        model.config_hash = Some(ctx.hash.clone());
        let pushed_path = ctx.path(PUSHED_MODEL);
        model.save(&pushed_path)?;
        println!(
            "pushed {} course and {} cohort prototypes onto their closest training embeddings -> {}",
            report.course.len(),
            report.cohort.len(),
            pushed_path.display()
        );
    }
    if let Some(id) = record {
        let rec = records
            .iter()
            .find(|r| r.admission_id == id)
            .ok_or_else(|| Error::Data(format!("admission {id} not found in {RECORDS}")))?;
        let report = case_report(&model, &ctx.schema, rec)?;
        let case_path = ctx.path(&format!("case_{id}.json"));
        write_stamped_json(&case_path, &ctx.hash, &report)?;
        let series = variable_series(&ctx.schema, rec)?;
        let series_path = ctx.path(&format!("series_{id}.csv"));
        write_series_csv(&series_path, &series)?;
        ctx.csv_meta(&series_path, series.len())?;
        let enc = encode_record(&ctx.schema, &model.standardizer, rec)?;
        let traj_path = ctx.path(&format!("trajectory_{id}.csv"));
        write_trajectory_csv(&traj_path, &model, &enc)?;
        ctx.csv_meta(&traj_path, enc.x.nrows())?;
        println!(
            "case {id}: predicted risk {:.4} (outcome {}), course logit {:+.4}, cohort logit {:+.4} -> {}",
            report.prediction,
            report.label,
            report.z_course,
            report.z_cohort,
            case_path.display()
        );
    }
    Ok(())
}

fn cmd_export_interactions(ctx: &Ctx) -> Result<()> {
    let model = ctx.load_model()?;
    let path = ctx.path(INTERACTIONS);
    let meta = write_interactions_csv(&path, &model)?;
    println!(
        "exported {}x{} weight-adjustment matrix -> {}",
        meta.course_order.len(),
        meta.cohort_order.len(),
        path.display()
    );
    Ok(())
}

fn cmd_gradcheck(ctx: &Ctx) -> Result<()> {
    // The check runs central differences per parameter coordinate, so it
    // shrinks the configured model rather than probing production widths.
    let mut model_cfg = ctx.cfg.model.clone();
    model_cfg.n_course_prototypes = model_cfg.n_course_prototypes.min(3);
    model_cfg.n_cohort_prototypes = model_cfg.n_cohort_prototypes.min(2);
    model_cfg.phys_embed = model_cfg.phys_embed.min(4);
    model_cfg.demo_hidden = model_cfg.demo_hidden.min(8);
    model_cfg.channel_hidden = model_cfg.channel_hidden.min(2);
    let mut spec = ctx.cfg.data.synthetic.clone();
    spec.n_patients = 4;
    spec.max_admissions_per_patient = 1;
    spec.t_hours = spec.t_hours.min(4);
    let (records, _) = generate(&ctx.schema, &spec)?;
    let st = Standardizer::fit(&ctx.schema, &records)?;
    let mut model = Model::new(&ctx.schema, model_cfg, st)?;
    let encoded = encode_dataset(&ctx.schema, &model.standardizer, &records)?;
    let entries = gradient_check(&mut model, &encoded, &ctx.cfg.train, 1e-5)?;
    let passed = entries.iter().all(GradCheckEntry::passed);

    #[derive(Serialize)]
    struct GradReport {
        passed: bool,
        entries: Vec<GradCheckEntry>,
    }
    write_stamped_json(
        &ctx.path(GRADCHECK),
        &ctx.hash,
        &GradReport { passed, entries: entries.clone() },
    )?;
    for e in &entries {
        println!(
            "{:<24} {:<10} max rel err {:.3e} (tolerance {:.0e}) {}",
            e.name,
            format!("{:?}", e.class).to_lowercase(),
            e.max_relative_error,
            e.tolerance,
            if e.passed() { "ok" } else { "FAIL" }
        );
    }
    if passed {
        println!("gradient check passed for {} parameter tensors", entries.len());
        Ok(())
    } else {
        let failures = entries.iter().filter(|e| !e.passed()).count();
        Err(Error::Numeric {
            stage: "gradient check".into(),
            detail: format!("{failures} parameter tensors out of tolerance"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::error::ErrorKind;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(args)
    }

    #[test]
    fn rejects_unknown_flags_and_bad_horizons() {
        let err = parse(&["protodoctor", "train", "--mystery"]).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::UnknownArgument);

        let err = parse(&["protodoctor", "--T", "36", "gen-data"]).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::ValueValidation);

        assert!(parse(&["protodoctor"]).is_err());
        assert!(parse(&["protodoctor", "gen-data", "split"]).is_err());
    }

    #[test]
    fn enable_flags_accept_bare_and_explicit_forms() {
        let cli = parse(&["protodoctor", "train", "--enable-dci=false"]).unwrap();
        match cli.command {
            Command::Train { enable_par, enable_dci } => {
                assert_eq!(enable_par, None);
                assert_eq!(enable_dci, Some(false));
            }
            _ => panic!("expected train"),
        }
        let cli = parse(&["protodoctor", "train", "--enable-par"]).unwrap();
        match cli.command {
            Command::Train { enable_par, .. } => assert_eq!(enable_par, Some(true)),
            _ => panic!("expected train"),
        }
    }

    #[test]
    fn global_flags_parse_after_the_subcommand() {
        let cli = parse(&["protodoctor", "eval", "--runs", "2", "--seed", "9", "--T", "48"]).unwrap();
        assert_eq!(cli.seed, Some(9));
        assert_eq!(cli.horizon, Some(48));
        match cli.command {
            Command::Eval { runs } => assert_eq!(runs, Some(2)),
            _ => panic!("expected eval"),
        }
    }

    fn tiny_config(dir: &Path) -> PathBuf {
        let path = dir.join("tiny.toml");
        std::fs::write(
            &path,
            r#"
[data.synthetic]
n_patients = 30
max_admissions_per_patient = 2
t_hours = 6

[model]
n_course_prototypes = 4
n_cohort_prototypes = 3
phys_embed = 4
demo_hidden = 6

[train]
max_epochs = 2
batch_size = 8

[eval]
seeds = [0]
all_variants = false
"#,
        )
        .unwrap();
        path
    }

    fn invoke(config: &Path, out: &Path, tail: &[&str]) -> Result<()> {
        let mut args = vec![
            "protodoctor".to_string(),
            "--config".to_string(),
            config.display().to_string(),
            "--out".to_string(),
            out.display().to_string(),
        ];
        args.extend(tail.iter().map(|s| s.to_string()));
        run_with(Cli::try_parse_from(args).unwrap())
    }

    #[test]
    fn pipeline_runs_end_to_end_and_artifacts_carry_the_config_hash() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let out = dir.path().join("work");

        invoke(&config, &out, &["gen-data"]).unwrap();
        invoke(&config, &out, &["split"]).unwrap();
        invoke(&config, &out, &["preprocess"]).unwrap();
        invoke(&config, &out, &["train"]).unwrap();
        invoke(&config, &out, &["eval"]).unwrap();
        invoke(&config, &out, &["export-interactions"]).unwrap();

        let records_meta: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.join("records.meta.json")).unwrap(),
        )
        .unwrap();
        let metrics: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join(METRICS)).unwrap()).unwrap();
        let hash = metrics["config_hash"].as_str().unwrap();
        assert_eq!(hash.len(), 64);
        assert_eq!(records_meta["config_hash"].as_str().unwrap(), hash);
        assert!(metrics["auroc"].as_f64().unwrap() >= 0.0);

        // The archived model carries the same provenance.
        let cfg = AppConfig::load(Some(&config)).unwrap();
        let model = Model::load(&out.join(MODEL), &cfg.load_schema().unwrap()).unwrap();
        assert_eq!(model.config_hash.as_deref(), Some(hash));

        // A case report for a test-partition admission.
        let split = DatasetSplit::load(&out.join(SPLIT)).unwrap();
        let id = split.test[0].clone();
        invoke(&config, &out, &["interpret", "--record", &id]).unwrap();
        let case: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.join(format!("case_{id}.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(case["admission_id"].as_str().unwrap(), id);
        assert_eq!(case["config_hash"].as_str().unwrap(), hash);
    }

    #[test]
    fn rerunning_a_stage_reproduces_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let out = dir.path().join("work");

        invoke(&config, &out, &["gen-data"]).unwrap();
        invoke(&config, &out, &["train"]).unwrap();
        let first_records = std::fs::read(out.join(RECORDS)).unwrap();
        let first_model = std::fs::read(out.join(MODEL)).unwrap();

        invoke(&config, &out, &["gen-data"]).unwrap();
        invoke(&config, &out, &["train"]).unwrap();
        assert_eq!(first_records, std::fs::read(out.join(RECORDS)).unwrap());
        assert_eq!(first_model, std::fs::read(out.join(MODEL)).unwrap());
    }

    #[test]
    fn disabling_interactions_freezes_the_adjustment_matrix_at_zero() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let out = dir.path().join("work");

        invoke(&config, &out, &["gen-data"]).unwrap();
        invoke(&config, &out, &["train", "--enable-dci=false"]).unwrap();

        let cfg = AppConfig::load(Some(&config)).unwrap();
        let model = Model::load(&out.join(MODEL), &cfg.load_schema().unwrap()).unwrap();
        assert!(!model.config.enable_interactions);
        let matrix = model.params.tensor(model.head.interactions);
        assert!(matrix.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_inputs_and_unknown_admissions_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let out = dir.path().join("work");

        let err = invoke(&config, &out, &["train"]).unwrap_err();
        assert_eq!(err.exit_code(), 3);

        invoke(&config, &out, &["gen-data"]).unwrap();
        invoke(&config, &out, &["train"]).unwrap();
        let err = invoke(&config, &out, &["interpret", "--record", "adm-999999"]).unwrap_err();
        assert!(matches!(err, Error::Data(_)));

        let err = invoke(&config, &out, &["interpret"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
