//! Per-group mean SHAP contributions on predicted positives, and the
//! male-minus-female difference for every feature.

use fairaudit::aggregate::{contribution_diff, group_positions, select_category, AggregatedAttribution, OutcomeCategory};
use fairaudit::data::{encode, load_csv, split, Schema};
use fairaudit::model::{predict_all, train_random_forest, ForestConfig};
use fairaudit::shap::{ShapConfig, ShapExplainer};

fn main() -> fairaudit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let schema = Schema::from_path(format!("{dir}/adult.schema.json"))?;
    let raw = load_csv(format!("{dir}/adult.csv"), &schema)?;
    let (train, test) = split(&encode(&raw), 0.3, 42)?;
    let forest = train_random_forest(&train, &ForestConfig::default())?;
    let preds = predict_all(&forest, &test);

    let sex = &schema.protected[0];
    let members = group_positions(&test, &raw, sex)?;
    let shap = ShapExplainer::new(&train, ShapConfig::default())?;
    let mut aggs = Vec::new();
    for (value, pos) in [(&sex.protected_value, &members.protected), (&sex.non_protected_value, &members.non_protected)] {
        let cell = select_category(&preds, &test.labels, pos, OutcomeCategory::P, Some(50), 42)?;
        let atts = shap.explain_rows(&forest, &test, &cell)?;
        aggs.push(AggregatedAttribution::new(&sex.attribute, value.as_str(), OutcomeCategory::P, &atts)?);
    }
    let (female, male) = (&aggs[0], &aggs[1]);
    for f in &female.features {
        println!(
            "{f:>16} F {:+.4}  M {:+.4}  diff {:+.4}",
            female.signed(f).unwrap(),
            male.signed(f).unwrap(),
            contribution_diff(male, female, f)?
        );
    }
    Ok(())
}
