//! Local surrogate explanation of one Adult test instance.

use std::sync::Arc;

use fairaudit::data::{encode, load_csv, split, Schema, TrainingStats};
use fairaudit::lime::{LimeConfig, LimeExplainer};
use fairaudit::model::{train_random_forest, ForestConfig};

fn main() -> fairaudit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let schema = Schema::from_path(format!("{dir}/adult.schema.json"))?;
    let raw = load_csv(format!("{dir}/adult.csv"), &schema)?;
    let (train, test) = split(&encode(&raw), 0.3, 42)?;
    let forest = train_random_forest(&train, &ForestConfig::default())?;

    let stats = Arc::new(TrainingStats::from_dataset(&train));
    let lime = LimeExplainer::new(train.mapping.clone(), stats, LimeConfig::default())?;
    let a = lime.explain(&forest, test.row(0), 0)?;
    let fit = a.surrogate.as_ref().expect("lime keeps its fit");
    println!("p(>50K) = {:.3}, surrogate R2 = {:.3}, kernel width {:.2}", a.prediction, fit.r2, fit.kernel_width);
    for (f, c) in a.features.iter().zip(&a.contributions) {
        println!("{f:>16} {c:+.4}");
    }
    Ok(())
}
