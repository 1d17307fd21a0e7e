//! Save a trained model, load it back, and confirm identical predictions.

use fairaudit::data::{encode, load_csv, split, Schema};
use fairaudit::model::{load_snapshot, save_snapshot, train_random_forest, BlackBoxModel, Classifier, ForestConfig};

fn main() -> fairaudit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let schema = Schema::from_path(format!("{dir}/adult.schema.json"))?;
    let raw = load_csv(format!("{dir}/adult.csv"), &schema)?;
    let (train, test) = split(&encode(&raw), 0.3, 42)?;
    let cfg = ForestConfig { n_trees: 20, ..ForestConfig::default() };
    let model = BlackBoxModel::Forest(train_random_forest(&train, &cfg)?);

    let path = std::env::temp_dir().join("fairaudit-example.snapshot");
    save_snapshot(&model, &path)?;
    let back = load_snapshot(&path)?;
    let same = (0..test.len()).all(|i| model.predict_proba(test.row(i)) == back.predict_proba(test.row(i)));
    println!("{} bytes, predictions identical: {same}", std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));
    Ok(())
}
