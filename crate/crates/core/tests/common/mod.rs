use std::path::{Path, PathBuf};

use rand::Rng;

pub struct Fixture {
    pub csv: PathBuf,
    pub schema: PathBuf,
}

/// 600 rows; the label depends on `x` and `kind`, and group B gets a small
/// boost so the fairness table has something to show.
pub fn write_fixture(dir: &Path) -> Fixture {
    let mut rng = fairaudit::seed::rng(3);
    let mut csv = String::from("group,x,kind,label\n");
    for _ in 0..600 {
        let g = if rng.gen_bool(0.5) { "A" } else { "B" };
        let x: f64 = rng.gen_range(0.0..10.0);
        let kind = ["p", "q", "r"][rng.gen_range(0..3)];
        let score = x + if kind == "r" { 2.0 } else { 0.0 } + if g == "B" { 1.0 } else { 0.0 } + rng.gen_range(-1.0..1.0);
        let label = if score > 7.0 { "yes" } else { "no" };
        csv.push_str(&format!("{g},{x:.3},{kind},{label}\n"));
    }
    let schema = r#"{
  "features": [
    {"name": "group", "kind": "categorical", "categories": ["A", "B"]},
    {"name": "x", "kind": "numeric"},
    {"name": "kind", "kind": "categorical", "categories": ["p", "q", "r"]}
  ],
  "target": {"name": "label", "favorable": "yes"},
  "protected": [{"name": "group", "protected_value": "A", "non_protected_value": "B"}]
}"#;
    let rules = r#"{
  "rules": [
    {"feature": "group", "kind": "identity"},
    {"feature": "x", "kind": "bins", "bins": [{"label": "low", "max": 5}, {"label": "high", "min": 5}]},
    {"feature": "kind", "kind": "identity"}
  ]
}"#;
    let f = Fixture {
        csv: dir.join("toy.csv"),
        schema: dir.join("toy.schema.json"),
    };
    std::fs::write(&f.csv, csv).unwrap();
    std::fs::write(&f.schema, schema).unwrap();
    std::fs::write(dir.join("toy.rules.json"), rules).unwrap();
    f
}
