//! Line-delimited JSON record files and their metadata sidecars.
//!
//! Records go one JSON object per line into `<name>.jsonl`; run metadata
//! (creation time, tool version, hashes, counts) lives next to it in
//! `<name>.meta.json` so the data files themselves stay byte-stable for a
//! given input.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::Schema;

use super::record::ClinicalRecord;
use super::synthetic::RecordTruth;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub tool_version: String,
    pub created_unix: u64,
    pub schema_fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub n_records: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl ArtifactMeta {
    pub fn new(schema: &Schema, n_records: usize) -> ArtifactMeta {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ArtifactMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            schema_fingerprint: schema.fingerprint(),
            config_hash: None,
            n_records,
            extra: BTreeMap::new(),
        }
    }

    pub fn with_config_hash(mut self, hash: &str) -> ArtifactMeta {
        self.config_hash = Some(hash.to_string());
        self
    }

    pub fn with_extra(mut self, key: &str, value: serde_json::Value) -> ArtifactMeta {
        self.extra.insert(key.to_string(), value);
        self
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("meta serialization failed: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Path of the metadata sidecar for a data file: `x.jsonl -> x.meta.json`.
pub fn meta_path(data_path: &Path) -> std::path::PathBuf {
    data_path.with_extension("meta.json")
}

pub fn write_records(path: &Path, records: &[ClinicalRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(rec)
            .map_err(|e| Error::Data(format!("record serialization failed: {e}")))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path, schema: &Schema) -> Result<Vec<ClinicalRecord>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ClinicalRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Data(format!("{}:{}: record parse failed: {e}", path.display(), i + 1))
        })?;
        rec.validate(schema).map_err(|e| {
            Error::Data(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn write_truths(path: &Path, truths: &[RecordTruth]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for t in truths {
        let line = serde_json::to_string(t)
            .map_err(|e| Error::Data(format!("truth serialization failed: {e}")))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truths(path: &Path) -> Result<Vec<RecordTruth>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: RecordTruth = serde_json::from_str(&line).map_err(|e| {
            Error::Data(format!("{}:{}: truth parse failed: {e}", path.display(), i + 1))
        })?;
        out.push(t);
    }
    Ok(out)
}
