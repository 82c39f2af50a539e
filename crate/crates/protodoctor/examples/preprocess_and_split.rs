//! Patient-level splitting and channel encoding: how raw sparse records
//! become dense model inputs without leaking test statistics.

use std::collections::HashSet;

use protodoctor::ehr::{encode_record, generate, split_by_patient, Standardizer, SyntheticSpec};
use protodoctor::schema::Schema;
use protodoctor::Result;

fn main() -> Result<()> {
    let schema = Schema::default_schema();
    let spec = SyntheticSpec {
        n_patients: 80,
        t_hours: 8,
        seed: 3,
        ..SyntheticSpec::default()
    };
    let (records, _) = generate(&schema, &spec)?;

    let split = split_by_patient(&records, (0.7, 0.15, 0.15), 0)?;
    println!(
        "{} admissions -> {} train / {} val / {} test",
        records.len(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );

    // Repeat admissions of one patient must stay in one partition.
    let patients_of = |ids: &[String]| -> HashSet<&str> {
        records
            .iter()
            .filter(|r| ids.contains(&r.admission_id))
            .map(|r| r.patient_id.as_str())
            .collect()
    };
    let train_patients = patients_of(&split.train);
    let test_patients = patients_of(&split.test);
    assert!(train_patients.is_disjoint(&test_patients));
    println!("patient overlap between train and test: none");

    // Standardization statistics come from the training partition only.
    let train_records: Vec<_> = records
        .iter()
        .filter(|r| split.train.contains(&r.admission_id))
        .cloned()
        .collect();
    let st = Standardizer::fit(&schema, &train_records)?;

    let enc = encode_record(&schema, &st, &records[0])?;
    println!(
        "\nencoded {}: {} hours x {} channels, {} demographic slots",
        enc.admission_id,
        enc.x.nrows(),
        enc.x.ncols(),
        enc.d.len()
    );

    // Numeric variables carry a standardized value channel; every variable
    // also gets an observed-mask channel at the end of the row.
    println!("\nhour 0, first channels:");
    for channel in 0..8 {
        println!(
            "  [{channel:2}] {:<32} {:+.3}",
            schema.channel_label(channel),
            enc.x[[0, channel]]
        );
    }
    Ok(())
}
