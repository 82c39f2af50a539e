//! Discrimination metrics and multi-seed ablation experiments.
//!
//! Both metrics follow the rank-based definitions so tied scores are handled
//! exactly: AUROC is the Mann-Whitney statistic with ties counting one half,
//! and AUPRC is average precision with tied scores collapsed into one
//! threshold (every positive in a tie group contributes the precision at the
//! group boundary). Tests pin both against independent pair-counting and
//! threshold-enumeration oracles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ehr::EncodedRecord;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::schema::Schema;
use crate::training::{train, TrainConfig, TrainOutcome};

fn validate_scored(scores: &[f64], labels: &[f64]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores against {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Data("no scored records".into()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Data(format!("non-finite score {s}")));
    }
    if let Some(l) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(Error::Data(format!("label {l} is not binary")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "need both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }
    Ok((n_pos, n_neg))
}

fn ascending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

/// Area under the ROC curve via midranks, equal to the probability that a
/// random positive outscores a random negative (ties count one half).
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (n_pos, n_neg) = validate_scored(scores, labels)?;
    let order = ascending_order(scores);
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share the midrank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            if labels[k] == 1.0 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Area under the precision-recall curve as average precision: each positive
/// contributes the precision at its tie group's boundary.
pub fn auprc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    let (n_pos, _) = validate_scored(scores, labels)?;
    let mut order = ascending_order(scores);
    order.reverse();
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let group_tp = order[i..j].iter().filter(|&&k| labels[k] == 1.0).count();
        tp += group_tp;
        seen += j - i;
        if group_tp > 0 {
            ap += group_tp as f64 * tp as f64 / seen as f64;
        }
        i = j;
    }
    Ok(ap / n_pos as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: f64,
    pub auprc: f64,
    pub n: usize,
    pub n_positive: usize,
}

pub fn binary_metrics(scores: &[f64], labels: &[f64]) -> Result<Metrics> {
    let (n_pos, _) = validate_scored(scores, labels)?;
    Ok(Metrics {
        auroc: auroc(scores, labels)?,
        auprc: auprc(scores, labels)?,
        n: scores.len(),
        n_positive: n_pos,
    })
}

/// Score every record with the model.
pub fn predict_all(model: &Model, records: &[EncodedRecord]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut scores = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for rec in records {
        scores.push(model.predict(rec)?);
        labels.push(rec.label);
    }
    Ok((scores, labels))
}

pub fn evaluate_model(model: &Model, records: &[EncodedRecord]) -> Result<Metrics> {
    let (scores, labels) = predict_all(model, records)?;
    binary_metrics(&scores, &labels)
}

pub fn write_predictions_csv(
    path: &Path,
    records: &[EncodedRecord],
    scores: &[f64],
) -> Result<()> {
    use std::io::Write as _;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "admission_id,label,prediction")?;
    for (rec, s) in records.iter().zip(scores) {
        writeln!(w, "{},{},{}", rec.admission_id, rec.label, s)?;
    }
    w.flush()?;
    Ok(())
}

// --- ablation experiments ----------------------------------------------------

/// One model variant in an ablation grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    pub enable_interactions: bool,
    pub enable_forecast: bool,
}

/// The standard nested grid: the full model, then interactions removed, then
/// the forecaster removed as well.
pub fn standard_variants() -> Vec<VariantSpec> {
    vec![
        VariantSpec {
            name: "full".into(),
            enable_interactions: true,
            enable_forecast: true,
        },
        VariantSpec {
            name: "no_interactions".into(),
            enable_interactions: false,
            enable_forecast: true,
        },
        VariantSpec {
            name: "no_interactions_no_forecast".into(),
            enable_interactions: false,
            enable_forecast: false,
        },
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: String,
    pub seed: u64,
    pub auroc: f64,
    pub auprc: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub runs: usize,
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub auprc_mean: f64,
    pub auprc_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<RunResult>,
    pub summaries: Vec<VariantSummary>,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Everything needed to train and score one run. The standardizer is the one
/// the records were encoded with; it travels into each trained model so
/// archives can score raw records later.
pub struct ExperimentData<'a> {
    pub train: &'a [EncodedRecord],
    pub val: &'a [EncodedRecord],
    pub test: &'a [EncodedRecord],
    pub standardizer: &'a crate::ehr::Standardizer,
}

/// Train each variant once per seed and summarize test-set discrimination.
/// Seeds drive both initialization and batch order, so a rerun of the same
/// grid reproduces every number.
pub fn run_experiment(
    schema: &Schema,
    base_model: &ModelConfig,
    base_train: &TrainConfig,
    variants: &[VariantSpec],
    seeds: &[u64],
    data: &ExperimentData,
) -> Result<ExperimentReport> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config("experiment needs at least one variant and one seed".into()));
    }
    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for variant in variants {
        let mut aurocs = Vec::new();
        let mut auprcs = Vec::new();
        for &seed in seeds {
            let (_, metrics, outcome) =
                run_one(schema, base_model, base_train, variant, seed, data)?;
            log::info!(
                "variant {} seed {seed}: auroc {:.4}, auprc {:.4} ({} epochs)",
                variant.name,
                metrics.auroc,
                metrics.auprc,
                outcome.epochs_run
            );
            aurocs.push(metrics.auroc);
            auprcs.push(metrics.auprc);
            runs.push(RunResult {
                variant: variant.name.clone(),
                seed,
                auroc: metrics.auroc,
                auprc: metrics.auprc,
                best_epoch: outcome.best_epoch,
                epochs_run: outcome.epochs_run,
            });
        }
        let (auroc_mean, auroc_std) = mean_and_std(&aurocs);
        let (auprc_mean, auprc_std) = mean_and_std(&auprcs);
        summaries.push(VariantSummary {
            variant: variant.name.clone(),
            runs: seeds.len(),
            auroc_mean,
            auroc_std,
            auprc_mean,
            auprc_std,
        });
    }
    Ok(ExperimentReport { runs, summaries })
}

/// Train one variant with one seed and return the trained model with its
/// test metrics. Exposed so single runs can be driven directly.
pub fn run_one(
    schema: &Schema,
    base_model: &ModelConfig,
    base_train: &TrainConfig,
    variant: &VariantSpec,
    seed: u64,
    data: &ExperimentData,
) -> Result<(Model, Metrics, TrainOutcome)> {
    let model_cfg = ModelConfig {
        enable_interactions: variant.enable_interactions,
        enable_forecast: variant.enable_forecast,
        init_seed: seed,
        ..base_model.clone()
    };
    let train_cfg = TrainConfig { seed, ..base_train.clone() };
    let mut model = Model::new(schema, model_cfg, data.standardizer.clone())?;
    let outcome = train(&mut model, data.train, data.val, &train_cfg)?;
    let metrics = evaluate_model(&model, data.test)?;
    Ok((model, metrics, outcome))
}

pub fn write_experiment_json(path: &Path, report: &ExperimentReport) -> Result<()> {
    use std::io::Write as _;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)
        .map_err(|e| Error::Contract(format!("experiment report serialization failed: {e}")))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, summaries: &[VariantSummary]) -> Result<()> {
    use std::io::Write as _;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "variant,runs,auroc_mean,auroc_std,auprc_mean,auprc_std")?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.variant, s.runs, s.auroc_mean, s.auroc_std, s.auprc_mean, s.auprc_std
        )?;
    }
    w.flush()?;
    Ok(())
}
