//! Faithfulness curves of the global LIME, SHAP and counterfactual rankings
//! against random orders (a smaller sample than the default for speed).

use fairaudit::audit::{aopc_curves, prepare, AuditConfig};

fn main() -> fairaudit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let mut cfg = AuditConfig::new(format!("{dir}/adult.csv"), format!("{dir}/adult.schema.json"), "unused");
    cfg.aopc_instances = 60;
    cfg.aopc_trials = 10;
    let prep = prepare(&cfg)?;
    for c in aopc_curves(&prep)? {
        let pts: Vec<String> = c.points.iter().map(|p| format!("{:.3}", p.aopc)).collect();
        println!("{:>6}: {}", c.method, pts.join(" "));
    }
    Ok(())
}
