//! Data layer: clinical records, preprocessing, splitting, synthetic
//! generation, and file formats.

pub mod jsonl;
pub mod preprocess;
pub mod record;
pub mod split;
pub mod synthetic;

pub use preprocess::{encode_dataset, encode_demographics, encode_record, EncodedRecord, Standardizer};
pub use record::{ClinicalRecord, Demographics, HourRow, ObservedValue};
pub use split::{split_by_patient, DatasetSplit};
pub use synthetic::{generate, RecordTruth, SyntheticSpec};
