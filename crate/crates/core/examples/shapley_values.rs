//! Exact interventional Shapley values, checked against the efficiency
//! identity, and a sampled estimate for comparison.

use fairaudit::data::{encode, load_csv, split, Schema};
use fairaudit::model::{train_random_forest, ForestConfig};
use fairaudit::seed;
use fairaudit::shap::{exact_shapley, sample_background, sampled_shapley};

fn main() -> fairaudit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let schema = Schema::from_path(format!("{dir}/adult.schema.json"))?;
    let raw = load_csv(format!("{dir}/adult.csv"), &schema)?;
    let (train, test) = split(&encode(&raw), 0.3, 42)?;
    let forest = train_random_forest(&train, &ForestConfig::default())?;

    let background = sample_background(&train, 100, 7);
    let x = test.row(3);
    let exact = exact_shapley(&forest, &train.mapping, x, &background, 12)?;
    let approx = sampled_shapley(&forest, &train.mapping, x, &background, 500, &mut seed::rng(1))?;
    for (j, name) in train.mapping.feature_names().iter().enumerate() {
        println!("{name:>16} exact {:+.4}  sampled {:+.4}", exact.phi[j], approx.phi[j]);
    }
    let total: f64 = exact.phi.iter().sum();
    println!("sum {total:+.6} = f(x) - E[f] = {:+.6}", exact.full - exact.empty);
    Ok(())
}
