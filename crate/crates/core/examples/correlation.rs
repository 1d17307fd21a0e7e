//! Cramér's V between the discretized Adult features.

use fairaudit::data::{discretize, load_csv, DiscretizationRules, Schema};
use fairaudit::evaluate::correlation_matrix;

fn main() -> fairaudit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let schema = Schema::from_path(format!("{dir}/adult.schema.json"))?;
    let raw = load_csv(format!("{dir}/adult.csv"), &schema)?;
    let rules = DiscretizationRules::from_path(format!("{dir}/adult.rules.json"))?;
    let m = correlation_matrix(&discretize(&raw, &rules)?)?;

    print!("{:>15}", "");
    for f in &m.features {
        print!(" {:>6.6}", f);
    }
    println!();
    for (f, row) in m.features.iter().zip(&m.values) {
        print!("{f:>15}");
        for v in row {
            print!(" {v:6.3}");
        }
        println!();
    }
    Ok(())
}
