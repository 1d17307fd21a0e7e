use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairaudit::attribution::Method;
use fairaudit::audit::{self, AuditConfig};
use fairaudit::model::ModelKind;

#[derive(Parser)]
#[command(name = "fairaudit", version, about = "Fairness audit of a tabular classifier with aggregated local explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fairness table, per-group explanations, aggregates and diffs.
    Audit(Common),
    /// Audit, then retrain without each protected attribute and compare.
    Ablate(Common),
    /// Explain one test instance and print the attribution as JSON.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Position in the test split.
        #[arg(long)]
        index: usize,
        #[arg(long, value_enum, default_value = "lime")]
        method: Explainer,
    },
    /// Counterfactual for one test instance, printed as JSON.
    Counterfactual {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        index: usize,
    },
    /// Faithfulness curves of the global feature rankings.
    Aopc(Common),
    /// Cramér's V between discretized features.
    Correlate {
        #[command(flatten)]
        common: Common,
        /// Discretization rules; defaults to `<name>.rules.json` beside the schema.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Forest,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum Explainer {
    Lime,
    Shap,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Protected attribute to audit; repeat for several. Default: all in the schema.
    #[arg(long)]
    protected: Vec<String>,
    #[arg(long, value_enum, default_value = "forest")]
    model: Model,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Most instances explained per group and outcome category.
    #[arg(long, default_value_t = 100)]
    cap: usize,
    #[arg(long, default_value = "audit-out")]
    out: PathBuf,
    /// Also write every per-instance explanation.
    #[arg(long)]
    keep_raw: bool,
}

impl Common {
    fn config(self) -> AuditConfig {
        let mut c = AuditConfig::new(self.data, self.schema, self.out);
        c.protected = self.protected;
        c.model = match self.model {
            Model::Forest => ModelKind::Forest,
            Model::Linear => ModelKind::Linear,
        };
        c.seed = self.seed;
        c.cap = self.cap;
        c.keep_raw = self.keep_raw;
        c
    }
}

fn print<T: serde::Serialize>(value: &T) -> fairaudit::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> fairaudit::Result<()> {
    let done = |cfg: &AuditConfig| eprintln!("wrote {}", cfg.out.join("report.json").display());
    match cli.command {
        Command::Audit(c) => {
            let cfg = c.config();
            audit::cmd_audit(&cfg)?;
            done(&cfg);
        }
        Command::Ablate(c) => {
            let cfg = c.config();
            audit::cmd_ablate(&cfg)?;
            done(&cfg);
        }
        Command::Aopc(c) => {
            let cfg = c.config();
            audit::cmd_aopc(&cfg)?;
            done(&cfg);
        }
        Command::Correlate { common, rules } => {
            let mut cfg = common.config();
            cfg.rules = rules;
            audit::cmd_correlate(&cfg)?;
            done(&cfg);
        }
        Command::Explain { common, index, method } => {
            let method = match method {
                Explainer::Lime => Method::Lime,
                Explainer::Shap => Method::Shap,
            };
            print(&audit::cmd_explain(&common.config(), index, method)?)?;
        }
        Command::Counterfactual { common, index } => {
            print(&audit::cmd_counterfactual(&common.config(), index)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
