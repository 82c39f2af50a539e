//! Composite objective, optimizer, and the training loop.
//!
//! The objective per batch is the mean cross-entropy plus five weighted
//! regularizers: diversity penalties that spread each prototype bank apart,
//! a sparsity penalty pushing each record's course profile toward a template
//! with a few saturated entries, the trajectory-forecast error, and an L1
//! penalty on the interaction matrix. Every term is also reported raw
//! (unweighted) so ablations and logs stay comparable.
//!
//! Training is deterministic for a fixed config: parameters are injected
//! into a fresh tape every batch in registration order, batch shuffling and
//! dropout draw from generators seeded by (seed, epoch, stream), and all
//! reductions are sequential.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Tape, LN_CLAMP};
use crate::ehr::EncodedRecord;
use crate::encoders::EncodeMode;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::ParamLeaves;
use crate::prototypes::PrototypeBank;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Seed for batch shuffling and dropout.
    pub seed: u64,
    pub lambda_cohort_diversity: f64,
    pub lambda_course_diversity: f64,
    pub lambda_sparsity: f64,
    pub lambda_forecast: f64,
    pub lambda_interaction_l1: f64,
    /// Minimum pairwise prototype distance before the diversity penalty
    /// engages.
    pub min_distance: f64,
    /// Fraction of course prototypes a record should saturate.
    pub sparsity_target_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            lambda_cohort_diversity: 1e-3,
            lambda_course_diversity: 1e-3,
            lambda_sparsity: 5e-1,
            lambda_forecast: 5e-2,
            lambda_interaction_l1: 1e-3,
            min_distance: 3.0,
            sparsity_target_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch size, epoch limit, and patience must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.sparsity_target_fraction) {
            return Err(Error::Config(format!(
                "sparsity target fraction must be in [0,1], got {}",
                self.sparsity_target_fraction
            )));
        }
        Ok(())
    }
}

/// Raw (unweighted) loss terms plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub cross_entropy: f64,
    pub cohort_diversity: f64,
    pub course_diversity: f64,
    pub sparsity: f64,
    pub forecast: f64,
    pub interaction_l1: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    pub fn is_finite(&self) -> bool {
        [
            self.cross_entropy,
            self.cohort_diversity,
            self.course_diversity,
            self.sparsity,
            self.forecast,
            self.interaction_l1,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Target profile for the sparsity penalty: mostly zeros with a saturated
/// tail, matched against ascending-sorted similarities. The number of ones
/// is floor(fraction * n); leading zeros pad the rest.
pub fn sparsity_template(n: usize, fraction: f64) -> Array1<f64> {
    let ones = ((fraction * n as f64).floor() as usize).min(n);
    let mut t = Array1::zeros(n);
    for i in n - ones..n {
        t[i] = 1.0;
    }
    t
}

/// Indices that sort the values ascending; stable for ties, total over
/// non-finite values so a poisoned forward pass still reaches the finiteness
/// check instead of panicking here.
fn argsort_ascending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

// --- tape loss terms -------------------------------------------------------

/// Binary cross-entropy against a fixed label, with the log clamped so a
/// saturated prediction cannot produce infinities.
pub fn cross_entropy(tape: &mut Tape, y_hat: NodeId, label: f64) -> NodeId {
    let ln_p = tape.ln_clamped(y_hat);
    let neg_y = tape.neg(y_hat);
    let one_minus = tape.add_const(neg_y, 1.0);
    let ln_q = tape.ln_clamped(one_minus);
    let a = tape.scale(ln_p, label);
    let b = tape.scale(ln_q, 1.0 - label);
    let s = tape.add(a, b);
    tape.neg(s)
}

/// Sum over prototype pairs of max(0, d_min - ||p_i - p_j||)^2.
pub fn diversity_penalty(
    tape: &mut Tape,
    leaves: &ParamLeaves,
    bank: &PrototypeBank,
    min_distance: f64,
) -> NodeId {
    let mut terms = Vec::new();
    for i in 0..bank.len() {
        for j in (i + 1)..bank.len() {
            let pi = leaves.node(bank.entry(i));
            let pj = leaves.node(bank.entry(j));
            let diff = tape.sub(pi, pj);
            let sq = tape.dot(diff, diff);
            let dist = tape.sqrt(sq);
            let neg = tape.neg(dist);
            let gap = tape.add_const(neg, min_distance);
            let hinge = tape.relu(gap);
            terms.push(tape.mul(hinge, hinge));
        }
    }
    if terms.is_empty() {
        tape.scalar(0.0)
    } else {
        tape.add_all(&terms)
    }
}

/// Squared distance between the ascending-sorted similarities and the
/// sparsity template, one record.
fn sparsity_term(tape: &mut Tape, s_course: NodeId, template: NodeId) -> NodeId {
    let values: Vec<f64> = tape.value(s_course).iter().copied().collect();
    let perm = argsort_ascending(&values);
    let sorted = tape.gather(s_course, &perm);
    let diff = tape.sub(sorted, template);
    tape.dot(diff, diff)
}

/// Mean squared forecast error over hours 2..=T for one record; zero for
/// single-hour stays.
fn forecast_term(tape: &mut Tape, forecasts: &[NodeId], targets: &[NodeId]) -> NodeId {
    if forecasts.is_empty() {
        return tape.scalar(0.0);
    }
    let terms: Vec<NodeId> = forecasts
        .iter()
        .zip(targets)
        .map(|(&f, &t)| {
            let diff = tape.sub(f, t);
            tape.dot(diff, diff)
        })
        .collect();
    let sum = tape.add_all(&terms);
    tape.scale(sum, 1.0 / forecasts.len() as f64)
}

/// Sum of absolute values of the interaction matrix.
fn interaction_l1(tape: &mut Tape, leaves: &ParamLeaves, head: &crate::predictor::RiskHead) -> NodeId {
    let w = leaves.node(head.interactions);
    let a = tape.abs(w);
    tape.sum(a)
}

impl Model {
    /// Full objective for one batch. Returns the total node (for backward)
    /// and the evaluated breakdown.
    pub fn batch_objective(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        batch: &[&EncodedRecord],
        cfg: &TrainConfig,
        mode: &mut EncodeMode,
    ) -> (NodeId, ObjectiveBreakdown) {
        assert!(!batch.is_empty(), "empty batch");
        let template_arr = sparsity_template(
            self.config.n_course_prototypes,
            cfg.sparsity_target_fraction,
        );
        let template = tape.leaf_vec(template_arr.as_slice().unwrap());

        let mut ce_terms = Vec::with_capacity(batch.len());
        let mut sparsity_terms = Vec::with_capacity(batch.len());
        let mut forecast_terms = Vec::with_capacity(batch.len());
        for rec in batch {
            let fwd = self.forward_tape(tape, leaves, rec, mode);
            ce_terms.push(cross_entropy(tape, fwd.risk.y_hat, rec.label));
            sparsity_terms.push(sparsity_term(tape, fwd.s_course, template));
            if self.config.enable_forecast {
                forecast_terms.push(forecast_term(tape, &fwd.forecasts, &fwd.forecast_targets));
            }
        }
        let inv_n = 1.0 / batch.len() as f64;
        let ce_sum = tape.add_all(&ce_terms);
        let ce = tape.scale(ce_sum, inv_n);
        let sp_sum = tape.add_all(&sparsity_terms);
        let sparsity = tape.scale(sp_sum, inv_n);
        let forecast = if forecast_terms.is_empty() {
            tape.scalar(0.0)
        } else {
            let f_sum = tape.add_all(&forecast_terms);
            tape.scale(f_sum, inv_n)
        };

        let cohort_div = diversity_penalty(tape, leaves, &self.cohort_bank, cfg.min_distance);
        let course_div = diversity_penalty(tape, leaves, &self.course_bank, cfg.min_distance);
        let l1 = if self.config.enable_interactions {
            interaction_l1(tape, leaves, &self.head)
        } else {
            tape.scalar(0.0)
        };

        let weighted = [
            tape.scale(cohort_div, cfg.lambda_cohort_diversity),
            tape.scale(course_div, cfg.lambda_course_diversity),
            tape.scale(sparsity, cfg.lambda_sparsity),
            tape.scale(forecast, cfg.lambda_forecast),
            tape.scale(l1, cfg.lambda_interaction_l1),
        ];
        let mut total = ce;
        for w in weighted {
            total = tape.add(total, w);
        }

        let breakdown = ObjectiveBreakdown {
            cross_entropy: tape.scalar_value(ce),
            cohort_diversity: tape.scalar_value(cohort_div),
            course_diversity: tape.scalar_value(course_div),
            sparsity: tape.scalar_value(sparsity),
            forecast: tape.scalar_value(forecast),
            interaction_l1: tape.scalar_value(l1),
            total: tape.scalar_value(total),
        };
        (total, breakdown)
    }

    /// Objective over a whole set without building gradients (dropout off).
    pub fn evaluate_objective(
        &self,
        records: &[EncodedRecord],
        cfg: &TrainConfig,
    ) -> Result<ObjectiveBreakdown> {
        if records.is_empty() {
            return Err(Error::Data("cannot evaluate an empty record set".into()));
        }
        let template = sparsity_template(
            self.config.n_course_prototypes,
            cfg.sparsity_target_fraction,
        );
        let mut ce = 0.0;
        let mut sparsity = 0.0;
        let mut forecast = 0.0;
        for rec in records {
            let fwd = self.forward_plain(rec)?;
            ce += cross_entropy_plain(fwd.breakdown.y_hat, rec.label);

            let s = fwd.trajectory.last().unwrap();
            let mut sorted: Vec<f64> = s.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut d = 0.0;
            for (a, b) in sorted.iter().zip(template.iter()) {
                d += (a - b) * (a - b);
            }
            sparsity += d;

            if self.config.enable_forecast && fwd.trajectory.len() > 1 {
                let inputs = &fwd.trajectory[..fwd.trajectory.len() - 1];
                let preds = self.forecaster.forecast_plain(&self.params, inputs);
                let mut f = 0.0;
                for (pred, target) in preds.iter().zip(&fwd.trajectory[1..]) {
                    let mut d = 0.0;
                    for (a, b) in pred.iter().zip(target.iter()) {
                        d += (a - b) * (a - b);
                    }
                    f += d;
                }
                forecast += f / preds.len() as f64;
            }
        }
        let n = records.len() as f64;
        ce /= n;
        sparsity /= n;
        forecast /= n;

        let cohort_diversity = diversity_plain(self, &self.cohort_bank, cfg.min_distance);
        let course_diversity = diversity_plain(self, &self.course_bank, cfg.min_distance);
        let interaction_l1 = if self.config.enable_interactions {
            self.params
                .tensor_slice(self.head.interactions)
                .iter()
                .map(|v| v.abs())
                .sum()
        } else {
            0.0
        };
        let total = ce
            + cfg.lambda_cohort_diversity * cohort_diversity
            + cfg.lambda_course_diversity * course_diversity
            + cfg.lambda_sparsity * sparsity
            + cfg.lambda_forecast * forecast
            + cfg.lambda_interaction_l1 * interaction_l1;
        let b = ObjectiveBreakdown {
            cross_entropy: ce,
            cohort_diversity,
            course_diversity,
            sparsity,
            forecast,
            interaction_l1,
            total,
        };
        if !b.is_finite() {
            return Err(Error::Numeric {
                stage: "evaluation".into(),
                detail: "objective is not finite".into(),
            });
        }
        Ok(b)
    }
}

pub fn cross_entropy_plain(y_hat: f64, label: f64) -> f64 {
    -(label * y_hat.max(LN_CLAMP).ln() + (1.0 - label) * (1.0 - y_hat).max(LN_CLAMP).ln())
}

fn diversity_plain(model: &Model, bank: &PrototypeBank, min_distance: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..bank.len() {
        for j in (i + 1)..bank.len() {
            let pi = bank.prototype(&model.params, i);
            let pj = bank.prototype(&model.params, j);
            let dist = (&pi - &pj).mapv(|x| x * x).sum().sqrt();
            let gap = (min_distance - dist).max(0.0);
            total += gap * gap;
        }
    }
    total
}

// --- optimizer -------------------------------------------------------------

/// Adam with bias correction, over the flat parameter vector.
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

// --- training loop ---------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train: ObjectiveBreakdown,
    pub val: ObjectiveBreakdown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_total: f64,
    pub stopped_early: bool,
    pub history: Vec<EpochLog>,
}

fn stream_rng(seed: u64, epoch: usize, stream: u64) -> ChaCha20Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&(epoch as u64).to_le_bytes());
    bytes[16..24].copy_from_slice(&stream.to_le_bytes());
    ChaCha20Rng::from_seed(bytes)
}

fn weighted_mean(parts: &[(usize, ObjectiveBreakdown)]) -> ObjectiveBreakdown {
    let n: usize = parts.iter().map(|(w, _)| w).sum();
    let mut acc = ObjectiveBreakdown {
        cross_entropy: 0.0,
        cohort_diversity: 0.0,
        course_diversity: 0.0,
        sparsity: 0.0,
        forecast: 0.0,
        interaction_l1: 0.0,
        total: 0.0,
    };
    for (w, b) in parts {
        let f = *w as f64 / n as f64;
        acc.cross_entropy += f * b.cross_entropy;
        acc.cohort_diversity += f * b.cohort_diversity;
        acc.course_diversity += f * b.course_diversity;
        acc.sparsity += f * b.sparsity;
        acc.forecast += f * b.forecast;
        acc.interaction_l1 += f * b.interaction_l1;
        acc.total += f * b.total;
    }
    acc
}

/// Train in place. Early stopping tracks the total validation objective;
/// the parameters of the best epoch are restored before returning.
pub fn train(
    model: &mut Model,
    train_set: &[EncodedRecord],
    val_set: &[EncodedRecord],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }

    let mut adam = Adam::new(model.params.n_params(), cfg);
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = model.params.values().to_vec();
    let mut stale = 0usize;
    let mut history = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut stream_rng(cfg.seed, epoch, 0));
        let mut dropout_rng = stream_rng(cfg.seed, epoch, 1);

        let mut batch_logs = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&EncodedRecord> = chunk.iter().map(|&i| &train_set[i]).collect();
            let mut tape = Tape::new();
            let leaves = model.params.inject(&mut tape);
            let (total, breakdown) = model.batch_objective(
                &mut tape,
                &leaves,
                &batch,
                cfg,
                &mut EncodeMode::Train { rng: &mut dropout_rng },
            );
            if !breakdown.is_finite() {
                model.params.set_values(&best_params);
                return Err(Error::Numeric {
                    stage: "training".into(),
                    detail: format!("objective became non-finite in epoch {epoch}"),
                });
            }
            let grads = tape.backward(total);
            let flat = model.params.flat_gradient(&leaves, &grads);
            if flat.iter().any(|g| !g.is_finite()) {
                model.params.set_values(&best_params);
                return Err(Error::Numeric {
                    stage: "training".into(),
                    detail: format!("gradient became non-finite in epoch {epoch}"),
                });
            }
            let mut values = model.params.values().to_vec();
            adam.step(&mut values, &flat);
            model.params.set_values(&values);
            batch_logs.push((batch.len(), breakdown));
        }

        let train_log = weighted_mean(&batch_logs);
        let val_log = model.evaluate_objective(val_set, cfg)?;
        log::debug!(
            "epoch {epoch}: train total {:.6}, val total {:.6}",
            train_log.total,
            val_log.total
        );
        history.push(EpochLog { epoch, train: train_log, val: val_log });

        if val_log.total < best_val {
            best_val = val_log.total;
            best_epoch = epoch;
            best_params = model.params.values().to_vec();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    model.params.set_values(&best_params);
    Ok(TrainOutcome {
        epochs_run: history.len(),
        best_epoch,
        best_val_total: best_val,
        stopped_early,
        history,
    })
}

/// Epoch-by-epoch objective log as CSV, one row per split per epoch.
pub fn write_history_csv(path: &std::path::Path, history: &[EpochLog]) -> Result<()> {
    use std::io::Write as _;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "epoch,split,cross_entropy,cohort_diversity,course_diversity,sparsity,forecast,interaction_l1,total"
    )?;
    for log in history {
        for (split, b) in [("train", &log.train), ("val", &log.val)] {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                log.epoch,
                split,
                b.cross_entropy,
                b.cohort_diversity,
                b.course_diversity,
                b.sparsity,
                b.forecast,
                b.interaction_l1,
                b.total
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

// --- gradient checking ------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamClass {
    /// Shallow paths: risk head and demographic encoder.
    Linear,
    /// Prototype vectors (cosine + squash).
    Prototype,
    /// Anything inside a recurrent stack.
    Recurrent,
}

impl ParamClass {
    /// Default relative-error tolerance for a central difference with step
    /// around 1e-5.
    pub fn tolerance(self) -> f64 {
        match self {
            ParamClass::Linear => 1e-6,
            ParamClass::Prototype => 1e-4,
            ParamClass::Recurrent => 1e-3,
        }
    }
}

pub fn classify_param(name: &str) -> ParamClass {
    if name.starts_with("course_prototypes.") || name.starts_with("cohort_prototypes.") {
        ParamClass::Prototype
    } else if name.starts_with("phys.") || name.starts_with("forecast.") {
        ParamClass::Recurrent
    } else {
        ParamClass::Linear
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub name: String,
    pub class: ParamClass,
    pub max_relative_error: f64,
    pub tolerance: f64,
}

impl GradCheckEntry {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

/// Compare the analytic batch-objective gradient against central finite
/// differences for every parameter coordinate (dropout off).
///
/// Forecast targets are temporarily allowed to carry gradients: with the
/// stop-gradient in place the analytic gradient is intentionally not the
/// derivative of the objective, so the comparison would be meaningless.
pub fn gradient_check(
    model: &mut Model,
    records: &[EncodedRecord],
    cfg: &TrainConfig,
    step: f64,
) -> Result<Vec<GradCheckEntry>> {
    if records.is_empty() {
        return Err(Error::Data("gradient check needs at least one record".into()));
    }
    let saved_stop = model.config.stop_gradient_targets;
    model.config.stop_gradient_targets = false;
    let result = gradient_check_inner(model, records, cfg, step);
    model.config.stop_gradient_targets = saved_stop;
    result
}

fn gradient_check_inner(
    model: &mut Model,
    records: &[EncodedRecord],
    cfg: &TrainConfig,
    step: f64,
) -> Result<Vec<GradCheckEntry>> {
    let refs: Vec<&EncodedRecord> = records.iter().collect();
    let flat = {
        let mut tape = Tape::new();
        let leaves = model.params.inject(&mut tape);
        let (total, breakdown) =
            model.batch_objective(&mut tape, &leaves, &refs, cfg, &mut EncodeMode::Eval);
        if !breakdown.is_finite() {
            return Err(Error::Numeric {
                stage: "gradient check".into(),
                detail: "objective is not finite".into(),
            });
        }
        let grads = tape.backward(total);
        model.params.flat_gradient(&leaves, &grads)
    };

    let base = model.params.values().to_vec();
    let mut entries = Vec::new();
    for idx in 0..model.params.n_entries() {
        let e = model.params.entry(idx).clone();
        let mut worst = 0.0f64;
        for j in 0..e.len {
            let coord = e.offset + j;
            let mut probe = |delta: f64| -> f64 {
                model.params.values_mut()[coord] = base[coord] + delta;
                let mut tape = Tape::new();
                let leaves = model.params.inject(&mut tape);
                let (total, _) =
                    model.batch_objective(&mut tape, &leaves, &refs, cfg, &mut EncodeMode::Eval);
                let v = tape.scalar_value(total);
                model.params.values_mut()[coord] = base[coord];
                v
            };
            let numeric = (probe(step) - probe(-step)) / (2.0 * step);
            let rel = (flat[coord] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(rel);
        }
        let class = classify_param(&e.name);
        entries.push(GradCheckEntry {
            name: e.name,
            class,
            max_relative_error: worst,
            tolerance: class.tolerance(),
        });
    }
    model.params.set_values(&base);
    Ok(entries)
}
