//! Counterfactuals for the first few Adult instances predicted <=50K.

use std::sync::Arc;

use fairaudit::counterfactual::{CfConfig, CfExplainer, SearchSpace};
use fairaudit::data::{encode, load_csv, split, Schema, TrainingStats};
use fairaudit::model::{train_random_forest, Classifier, ForestConfig};

fn main() -> fairaudit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let schema = Schema::from_path(format!("{dir}/adult.schema.json"))?;
    let raw = load_csv(format!("{dir}/adult.csv"), &schema)?;
    let (train, test) = split(&encode(&raw), 0.3, 42)?;
    let forest = train_random_forest(&train, &ForestConfig::default())?;

    let space = Arc::new(SearchSpace::from_stats(&TrainingStats::from_dataset(&train)));
    let cf = CfExplainer::new(train.mapping.clone(), space, CfConfig::default())?;
    let negatives: Vec<usize> = (0..test.len()).filter(|&i| forest.predict(test.row(i)) == 0).take(5).collect();
    for i in negatives {
        let c = cf.find(&forest, test.row(i), i)?;
        let names = train.mapping.feature_names();
        let edits: Vec<String> = names
            .iter()
            .enumerate()
            .filter(|(j, _)| c.factual[*j] != c.counterfactual[*j])
            .map(|(j, n)| format!("{n}: {} -> {}", c.factual[j], c.counterfactual[j]))
            .collect();
        println!(
            "#{i}: p {:.2} -> {:.2}, distance {:.3}  [{}]",
            c.factual_probability,
            c.counterfactual_probability,
            c.encoded_euclidean,
            edits.join(", ")
        );
    }
    Ok(())
}
