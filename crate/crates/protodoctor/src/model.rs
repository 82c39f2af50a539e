//! Model assembly: configuration, the full forward pass in both tape and
//! plain form, and the binary archive format.
//!
//! Forward dataflow per record: the physiological encoder produces one
//! embedding per hour; the course bank scores every hour against each course
//! prototype, giving a similarity trajectory whose final row summarizes the
//! stay. The demographic encoder embeds the static vector; the cohort bank
//! scores it and a low-temperature softmax picks the matching cohort. The
//! risk head combines both sides into a mortality probability. A recurrent
//! forecaster over the trajectory provides the self-supervision signal used
//! during training.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Tape};
use crate::ehr::{EncodedRecord, Standardizer};
use crate::encoders::{DemoEncoder, EncodeMode, PhysEncoder, PrognosticEncoder};
use crate::error::{Error, Result};
use crate::nn::{ParamLeaves, ParamStore};
use crate::predictor::{RiskBreakdown, RiskHead, RiskNodes};
use crate::prototypes::{sparse_attribution, sparse_attribution_plain, PrototypeBank};
use crate::schema::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Simple,
    Channelwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_course_prototypes: usize,
    pub n_cohort_prototypes: usize,
    /// Dimension of the hourly physiological embedding.
    pub phys_embed: usize,
    /// Width of the demographic embedding (the encoder's hidden layer).
    pub demo_hidden: usize,
    /// Sharpness phi of the cosine squash.
    pub similarity_sharpness: f64,
    /// Temperature of the cohort attribution softmax.
    pub attribution_temperature: f64,
    pub encoder: EncoderKind,
    /// Hidden units per direction and layer of the channelwise encoder.
    pub channel_hidden: usize,
    /// Channel dropout probability (channelwise encoder only).
    pub dropout: f64,
    /// Learn per-cohort adjustments to the course weights.
    pub enable_interactions: bool,
    /// Train the trajectory forecaster alongside the predictor.
    pub enable_forecast: bool,
    /// Treat forecast targets as constants during backprop.
    pub stop_gradient_targets: bool,
    /// Seed for parameter initialization.
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_course_prototypes: 50,
            n_cohort_prototypes: 20,
            phys_embed: 32,
            demo_hidden: 64,
            similarity_sharpness: 5.0,
            attribution_temperature: 1e-6,
            encoder: EncoderKind::Simple,
            channel_hidden: 8,
            dropout: 0.5,
            enable_interactions: true,
            enable_forecast: true,
            stop_gradient_targets: true,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_course_prototypes == 0 || self.n_cohort_prototypes == 0 {
            return Err(Error::Config("prototype counts must be positive".into()));
        }
        if self.phys_embed == 0 || self.demo_hidden == 0 {
            return Err(Error::Config("embedding widths must be positive".into()));
        }
        if self.attribution_temperature <= 0.0 {
            return Err(Error::Config("attribution temperature must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0,1), got {}",
                self.dropout
            )));
        }
        if self.similarity_sharpness <= 0.0 {
            return Err(Error::Config("similarity sharpness must be positive".into()));
        }
        Ok(())
    }
}

pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub phys: PhysEncoder,
    pub demo: DemoEncoder,
    pub forecaster: PrognosticEncoder,
    pub course_bank: PrototypeBank,
    pub cohort_bank: PrototypeBank,
    pub head: RiskHead,
    pub standardizer: Standardizer,
    pub schema_fingerprint: String,
    /// Hash of the run configuration that produced this model, carried into
    /// the archive for provenance.
    pub config_hash: Option<String>,
}

/// Tape nodes of one record's forward pass.
pub struct TapeForward {
    /// Similarity vector per hour.
    pub trajectory: Vec<NodeId>,
    /// Final-hour similarities (the record's course profile).
    pub s_course: NodeId,
    /// Cohort attribution after the sparse softmax.
    pub s_cohort: NodeId,
    pub risk: RiskNodes,
    /// Forecasts for hours 2..=T and their targets; empty when the
    /// forecaster is disabled or the stay is a single hour.
    pub forecasts: Vec<NodeId>,
    pub forecast_targets: Vec<NodeId>,
}

/// Plain-array forward pass, used for evaluation and reports.
#[derive(Debug, Clone)]
pub struct PlainForward {
    pub hourly_embeddings: Vec<Array1<f64>>,
    pub trajectory: Vec<Array1<f64>>,
    pub demo_embedding: Array1<f64>,
    pub cohort_similarities: Array1<f64>,
    pub cohort_attribution: Array1<f64>,
    pub breakdown: RiskBreakdown,
}

impl Model {
    pub fn new(schema: &Schema, config: ModelConfig, standardizer: Standardizer) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(config.init_seed);
        let mut ps = ParamStore::new();
        let in_width = schema.layout().width;
        let phys = match config.encoder {
            EncoderKind::Simple => {
                PhysEncoder::register_simple(&mut ps, "phys", in_width, config.phys_embed, &mut rng)
            }
            EncoderKind::Channelwise => PhysEncoder::register_channelwise(
                &mut ps,
                "phys",
                schema,
                config.channel_hidden,
                config.phys_embed,
                config.dropout,
                &mut rng,
            ),
        };
        let demo = DemoEncoder::register(
            &mut ps,
            "demo",
            schema.demographic_width(),
            config.demo_hidden,
            &mut rng,
        );
        let forecaster =
            PrognosticEncoder::register(&mut ps, "forecast", config.n_course_prototypes, &mut rng);
        let course_bank = PrototypeBank::register(
            &mut ps,
            "course_prototypes",
            config.n_course_prototypes,
            config.phys_embed,
            config.similarity_sharpness,
            &mut rng,
        );
        let cohort_bank = PrototypeBank::register(
            &mut ps,
            "cohort_prototypes",
            config.n_cohort_prototypes,
            config.demo_hidden,
            config.similarity_sharpness,
            &mut rng,
        );
        let head = RiskHead::register(
            &mut ps,
            "head",
            config.n_course_prototypes,
            config.n_cohort_prototypes,
            config.enable_interactions,
            &mut rng,
        );
        Ok(Model {
            config,
            params: ps,
            phys,
            demo,
            forecaster,
            course_bank,
            cohort_bank,
            head,
            standardizer,
            schema_fingerprint: schema.fingerprint(),
            config_hash: None,
        })
    }

    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        leaves: &ParamLeaves,
        rec: &EncodedRecord,
        mode: &mut EncodeMode,
    ) -> TapeForward {
        let hourly = self.phys.encode(tape, leaves, &rec.x, mode);
        let trajectory: Vec<NodeId> = hourly
            .iter()
            .map(|&h| self.course_bank.similarities(tape, leaves, h))
            .collect();
        let s_course = *trajectory.last().expect("records have at least one hour");

        let h_demo = self.demo.encode(tape, leaves, &rec.d);
        let cohort_sims = self.cohort_bank.similarities(tape, leaves, h_demo);
        let s_cohort = sparse_attribution(tape, cohort_sims, self.config.attribution_temperature);

        let risk = self.head.risk(tape, leaves, s_course, s_cohort);

        let (forecasts, forecast_targets) = if self.config.enable_forecast && trajectory.len() > 1 {
            let inputs = &trajectory[..trajectory.len() - 1];
            let forecasts = self.forecaster.forecast(tape, leaves, inputs);
            let targets: Vec<NodeId> = trajectory[1..]
                .iter()
                .map(|&s| {
                    if self.config.stop_gradient_targets {
                        tape.detach(s)
                    } else {
                        s
                    }
                })
                .collect();
            (forecasts, targets)
        } else {
            (Vec::new(), Vec::new())
        };

        TapeForward { trajectory, s_course, s_cohort, risk, forecasts, forecast_targets }
    }

    pub fn forward_plain(&self, rec: &EncodedRecord) -> Result<PlainForward> {
        if rec.x.nrows() == 0 {
            return Err(Error::Data(format!("{}: record has no hours", rec.admission_id)));
        }
        let hourly = self.phys.encode_plain(&self.params, &rec.x);
        let trajectory: Vec<Array1<f64>> = hourly
            .iter()
            .map(|h| self.course_bank.similarities_plain(&self.params, h))
            .collect();
        let s_course = trajectory.last().unwrap().clone();

        let demo_embedding = self.demo.encode_plain(&self.params, &rec.d);
        let cohort_similarities = self.cohort_bank.similarities_plain(&self.params, &demo_embedding);
        let cohort_attribution =
            sparse_attribution_plain(&cohort_similarities, self.config.attribution_temperature);

        let breakdown = self.head.decompose(&self.params, &s_course, &cohort_attribution)?;
        Ok(PlainForward {
            hourly_embeddings: hourly,
            trajectory,
            demo_embedding,
            cohort_similarities,
            cohort_attribution,
            breakdown,
        })
    }

    /// Mortality probability for one encoded record.
    pub fn predict(&self, rec: &EncodedRecord) -> Result<f64> {
        Ok(self.forward_plain(rec)?.breakdown.y_hat)
    }
}

// ---------------------------------------------------------------------------
// Archive format: "PDMA" magic, format version, JSON header (config,
// standardizer, schema fingerprint, tensor directory), then all parameter
// values as little-endian f64 in registration order. No timestamps, so a
// retrained model from identical inputs produces identical bytes.

const ARCHIVE_MAGIC: &[u8; 4] = b"PDMA";
const ARCHIVE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ArchiveHeader {
    config: ModelConfig,
    schema_fingerprint: String,
    standardizer: Standardizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    tensors: Vec<TensorInfo>,
}

impl Model {
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = ArchiveHeader {
            config: self.config.clone(),
            schema_fingerprint: self.schema_fingerprint.clone(),
            standardizer: self.standardizer.clone(),
            config_hash: self.config_hash.clone(),
            tensors: self
                .params
                .entries()
                .iter()
                .map(|e| TensorInfo { name: e.name.clone(), shape: e.shape.clone() })
                .collect(),
        };
        let header_bytes = serde_json::to_vec(&header)
            .map_err(|e| Error::Contract(format!("archive header serialization failed: {e}")))?;

        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(ARCHIVE_MAGIC)?;
        w.write_all(&ARCHIVE_VERSION.to_le_bytes())?;
        w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
        w.write_all(&header_bytes)?;
        for v in self.params.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, schema: &Schema) -> Result<Model> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != ARCHIVE_MAGIC {
            return Err(Error::Contract(format!(
                "{}: not a model archive (bad magic)",
                path.display()
            )));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != ARCHIVE_VERSION {
            return Err(Error::Contract(format!(
                "{}: unsupported archive version {version}",
                path.display()
            )));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let header_len = u64::from_le_bytes(len) as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)?;
        let header: ArchiveHeader = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::Contract(format!("{}: archive header parse failed: {e}", path.display())))?;

        if header.schema_fingerprint != schema.fingerprint() {
            return Err(Error::Schema(format!(
                "archive was trained against a different schema (fingerprint {} vs {})",
                header.schema_fingerprint,
                schema.fingerprint()
            )));
        }

        let mut model = Model::new(schema, header.config, header.standardizer)?;
        model.config_hash = header.config_hash;
        // The rebuilt structure must match the stored tensor directory.
        if model.params.n_entries() != header.tensors.len() {
            return Err(Error::Contract(format!(
                "archive lists {} tensors, model defines {}",
                header.tensors.len(),
                model.params.n_entries()
            )));
        }
        for (e, info) in model.params.entries().iter().zip(&header.tensors) {
            if e.name != info.name || e.shape != info.shape {
                return Err(Error::Contract(format!(
                    "archive tensor {} {:?} does not match model tensor {} {:?}",
                    info.name, info.shape, e.name, e.shape
                )));
            }
        }

        let n = model.params.n_params();
        let mut values = vec![0.0f64; n];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        if r.read(&mut buf)? != 0 {
            return Err(Error::Contract(format!(
                "{}: trailing bytes after {n} parameter values",
                path.display()
            )));
        }
        model.params.set_values(&values);
        Ok(model)
    }
}
