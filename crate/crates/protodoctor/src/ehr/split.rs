//! Patient-grouped train/validation/test splitting.
//!
//! All admissions of a patient land in the same partition. Patients are
//! sorted by id, shuffled with a seeded generator, then assigned greedily:
//! each patient goes to the partition whose record-count target has the
//! largest remaining deficit (ties prefer train, then validation).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::record::ClinicalRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn partition_of(&self, admission_id: &str) -> Option<&'static str> {
        if self.train.iter().any(|a| a == admission_id) {
            Some("train")
        } else if self.val.iter().any(|a| a == admission_id) {
            Some("val")
        } else if self.test.iter().any(|a| a == admission_id) {
            Some("test")
        } else {
            None
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("split serialization failed: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<DatasetSplit> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: split parse failed: {e}", path.display())))
    }
}

pub fn split_by_patient(
    records: &[ClinicalRecord],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let (ft, fv, fe) = fractions;
    for f in [ft, fv, fe] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!(
                "split fractions must lie strictly between 0 and 1, got {fractions:?}"
            )));
        }
    }
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must sum to 1, got {fractions:?}"
        )));
    }
    if records.is_empty() {
        return Err(Error::Data("cannot split an empty record set".into()));
    }

    // Group admissions by patient; admission ids must be unique.
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        if !seen.insert(r.admission_id.as_str()) {
            return Err(Error::Data(format!(
                "duplicate admission id {:?}",
                r.admission_id
            )));
        }
        groups.entry(r.patient_id.as_str()).or_default().push(r.admission_id.as_str());
    }

    let mut patients: Vec<&str> = groups.keys().copied().collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    patients.shuffle(&mut rng);

    let n = records.len() as f64;
    let mut deficits = [ft * n, fv * n, fe * n];
    let mut parts: [Vec<String>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for p in patients {
        let admissions = &groups[p];
        // Strict comparison keeps the earliest partition on ties.
        let mut target = 0;
        for i in 1..3 {
            if deficits[i] > deficits[target] {
                target = i;
            }
        }
        deficits[target] -= admissions.len() as f64;
        parts[target].extend(admissions.iter().map(|a| a.to_string()));
    }
    for part in &mut parts {
        part.sort();
    }
    let [train, val, test] = parts;
    Ok(DatasetSplit { seed, train, val, test })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::ehr::record::Demographics;

    fn stub(patient: &str, admission: &str) -> ClinicalRecord {
        ClinicalRecord {
            admission_id: admission.into(),
            patient_id: patient.into(),
            demographics: Demographics {
                ethnicity: 0,
                gender: 0,
                age: Some(60.0),
                height: Some(170.0),
                weight: Some(80.0),
            },
            t_hours: 1,
            hours: vec![],
            label: 0,
        }
    }

    #[test]
    fn ten_single_admission_patients_split_7_2_1() {
        let records: Vec<ClinicalRecord> = (0..10)
            .map(|i| stub(&format!("p{i}"), &format!("a{i}")))
            .collect();
        let split = split_by_patient(&records, (0.7, 0.15, 0.15), 13).unwrap();
        assert_eq!(split.train.len(), 7);
        assert_eq!(split.val.len(), 2);
        assert_eq!(split.test.len(), 1);
    }

    #[test]
    fn single_patient_stays_together() {
        let records: Vec<ClinicalRecord> =
            (0..5).map(|i| stub("p0", &format!("a{i}"))).collect();
        let split = split_by_patient(&records, (0.7, 0.15, 0.15), 99).unwrap();
        assert_eq!(split.train.len(), 5);
        assert!(split.val.is_empty());
        assert!(split.test.is_empty());
    }

    #[test]
    fn patients_never_straddle_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let mut records = Vec::new();
            let n_patients = rng.gen_range(3..30);
            for p in 0..n_patients {
                let n_adm = rng.gen_range(1..5);
                for a in 0..n_adm {
                    records.push(stub(&format!("p{p}"), &format!("p{p}-a{a}")));
                }
            }
            let split = split_by_patient(&records, (0.7, 0.15, 0.15), trial).unwrap();

            let partition_by_admission = |aid: &str| split.partition_of(aid).unwrap();
            for p in 0..n_patients {
                let parts: BTreeSet<&str> = records
                    .iter()
                    .filter(|r| r.patient_id == format!("p{p}"))
                    .map(|r| partition_by_admission(&r.admission_id))
                    .collect();
                assert_eq!(parts.len(), 1, "patient p{p} split across partitions");
            }
            let total = split.train.len() + split.val.len() + split.test.len();
            assert_eq!(total, records.len());
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let records: Vec<ClinicalRecord> = (0..40)
            .map(|i| stub(&format!("p{}", i / 2), &format!("a{i}")))
            .collect();
        let a = split_by_patient(&records, (0.7, 0.15, 0.15), 5).unwrap();
        let b = split_by_patient(&records, (0.7, 0.15, 0.15), 5).unwrap();
        assert_eq!(a, b);
        let c = split_by_patient(&records, (0.7, 0.15, 0.15), 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_fractions_rejected() {
        let records = vec![stub("p", "a")];
        assert!(split_by_patient(&records, (0.5, 0.2, 0.2), 1).is_err());
        assert!(split_by_patient(&records, (1.0, 0.0, 0.0), 1).is_err());
    }
}
