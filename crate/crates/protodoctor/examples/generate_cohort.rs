//! Generate a synthetic ICU cohort and look at what comes out.

use protodoctor::ehr::{generate, SyntheticSpec};
use protodoctor::schema::Schema;
use protodoctor::Result;

fn main() -> Result<()> {
    let schema = Schema::default_schema();
    let spec = SyntheticSpec {
        n_patients: 60,
        max_admissions_per_patient: 2,
        t_hours: 12,
        seed: 11,
        ..SyntheticSpec::default()
    };
    let (records, truths) = generate(&schema, &spec)?;

    let deaths: usize = records.iter().map(|r| r.label as usize).sum();
    println!(
        "{} admissions from {} patients, {} deaths ({:.0}%)",
        records.len(),
        spec.n_patients,
        deaths,
        100.0 * deaths as f64 / records.len() as f64
    );

    // Hour rows are sparse: only charted values appear.
    let rec = &records[0];
    println!("\nfirst hours of {} (label {}):", rec.admission_id, rec.label);
    for row in rec.hours.iter().take(3) {
        let charted: Vec<String> = row
            .values
            .iter()
            .map(|(name, value)| format!("{name}={value:?}"))
            .collect();
        println!("  t={:<2} {}", row.t, charted.join(", "));
    }

    // The generator keeps the ground truth behind each stay.
    let truth = &truths[0];
    let mix: Vec<f64> = truth
        .course_weights
        .iter()
        .map(|w| (w * 100.0).round() / 100.0)
        .collect();
    println!(
        "\nground truth for {}: cohort {}, mortality p={:.3}, course mix {mix:?}",
        truth.admission_id, truth.cohort, truth.p
    );

    let observed: usize = records
        .iter()
        .flat_map(|r| &r.hours)
        .map(|h| h.values.len())
        .sum();
    let possible: usize = records
        .iter()
        .map(|r| r.t_hours * schema.n_variables())
        .sum();
    println!(
        "\ncharted density: {:.1}% of variable-hours carry a value",
        100.0 * observed as f64 / possible as f64
    );
    Ok(())
}
