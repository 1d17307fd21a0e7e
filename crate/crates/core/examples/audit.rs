//! The full audit as the command-line tool runs it, restricted to sex and
//! a small cap per cell. Writes report.json and CSVs to a temp directory.

use fairaudit::audit::{cmd_audit, AuditConfig};

fn main() -> fairaudit::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let out = std::env::temp_dir().join("fairaudit-example-audit");
    let mut cfg = AuditConfig::new(format!("{dir}/adult.csv"), format!("{dir}/adult.schema.json"), &out);
    cfg.protected = vec!["sex".into()];
    cfg.cap = 20;
    let report = cmd_audit(&cfg)?;

    let p = report.procedural_fairness.as_ref().expect("audit fills attributions");
    for d in p.contribution_diffs.iter().filter(|d| d.feature == "sex") {
        println!("{} {:<2} male - female sex contribution {:+.4}", d.method, d.category, d.diff);
    }
    for s in &p.counterfactuals {
        println!("{} {:<2} burden {:.3} (n {})", s.group, s.category, s.burden.scaled, s.n);
    }
    println!("skipped cells: {}", report.skipped.len());
    println!("wrote {}", out.display());
    Ok(())
}
