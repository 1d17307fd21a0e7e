//! Train the default forest on Adult and print the group fairness table.

use fairaudit::data::{encode, load_csv, split, Schema};
use fairaudit::fairness::fairness_report;
use fairaudit::model::{accuracy, train_random_forest, ForestConfig};

fn main() -> fairaudit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let schema = Schema::from_path(format!("{dir}/adult.schema.json"))?;
    let raw = load_csv(format!("{dir}/adult.csv"), &schema)?;
    let (train, test) = split(&encode(&raw), 0.3, 42)?;
    let forest = train_random_forest(&train, &ForestConfig::default())?;
    println!("accuracy {:.4}", accuracy(&forest, &test)?);

    for group in &schema.protected {
        let r = fairness_report(&forest, &test, &raw, group)?;
        for m in &r.metrics {
            println!(
                "{:<4} {:<4} diff {:+.4}  z {:+6.2}  ({:.3} vs {:.3})",
                group.attribute, m.metric, m.diff, m.z, m.rate_non_protected, m.rate_protected
            );
        }
    }
    Ok(())
}
