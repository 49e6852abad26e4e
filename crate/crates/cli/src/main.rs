//! `cfsem` — counterfactual queries on linear Gaussian structural equation
//! models: validate model files, evaluate interventions / plans / optimal
//! plans under point or interval evidence, and cross-check results against a
//! seeded Monte Carlo simulation.

use std::io::Read;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfsem::oracle::{mc_counterfactual, SimConfig};
use cfsem::{EngineConfig, Error};

use cfsem_cli::model_file::{self, error_class, LoadedModel};
use cfsem_cli::output;
use cfsem_cli::query::{self, QueryKind, QueryOutcome};

#[derive(Parser)]
#[command(name = "cfsem", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file, printing an implied-moments summary.
    Validate {
        /// Path to the model JSON file.
        model: String,
    },
    /// Evaluate a counterfactual query against a model.
    Query {
        /// Path to the model JSON file.
        model: String,
        /// Path to the query JSON file, or `-` for stdin.
        query: String,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Evaluate a query and compare it with the Monte Carlo simulator.
    Oracle {
        /// Path to the model JSON file (structural mode).
        model: String,
        /// Path to the query JSON file, or `-` for stdin.
        query: String,
        #[command(flatten)]
        knobs: Knobs,
        /// Monte Carlo draws.
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
    },
}

#[derive(Args)]
struct Knobs {
    /// Absolute tolerance for interval-evidence quadrature.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for every stochastic path.
    #[arg(long, default_value_t = 0xcf5e)]
    seed: u64,
    /// Cap on the adjustment/conditioning-set size during identification.
    #[arg(long, default_value_t = 4)]
    max_adjustment_size: usize,
}

impl Knobs {
    fn engine_config(&self) -> EngineConfig {
        let mut cfg = EngineConfig::default();
        if let Some(tol) = self.tol {
            cfg.box_config.quad_tol = tol;
        }
        cfg.box_config.seed = self.seed;
        cfg.identify.max_set_size = self.max_adjustment_size;
        cfg
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { model } => cmd_validate(&model),
        Command::Query {
            model,
            query,
            knobs,
        } => cmd_query(&model, &query, &knobs),
        Command::Oracle {
            model,
            query,
            knobs,
            draws,
        } => cmd_oracle(&model, &query, &knobs, draws),
    };
    ExitCode::from(code)
}

fn read_input(path: &str) -> Result<String, String> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| format!("IoError: {e}"))?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).map_err(|e| format!("IoError: cannot read {path}: {e}"))
    }
}

fn load_model(path: &str) -> Result<LoadedModel, String> {
    let text = read_input(path)?;
    model_file::parse(&text)
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Unidentified { .. } => 3,
        Error::RejectionBudgetExceeded { .. } => 5,
        _ => 2,
    }
}

fn fail(msg: &str) -> u8 {
    eprintln!("{msg}");
    2
}

fn cmd_validate(model_path: &str) -> u8 {
    let loaded = match load_model(model_path) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let mode = match loaded.structural {
        Some(_) => "structural",
        None => "observational",
    };
    println!(
        "ok: {} vertices, {} directed edges, {} bidirected edges ({mode} mode)",
        loaded.diagram.vertex_count(),
        loaded.diagram.directed_edges().count(),
        loaded.diagram.bidirected_edges().count(),
    );
    let m = &loaded.moments;
    for v in m.variables() {
        println!(
            "  {v}: mean {} variance {}",
            output::num(m.mean_of(v).unwrap()),
            output::num(m.var_of(v).unwrap()),
        );
    }
    0
}

fn cmd_query(model_path: &str, query_path: &str, knobs: &Knobs) -> u8 {
    let loaded = match load_model(model_path) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let qtext = match read_input(query_path) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let parsed = match query::parse(&qtext) {
        Ok(q) => q,
        Err(e) => return fail(&e),
    };
    let engine = match loaded.engine() {
        Ok(e) => e.with_config(knobs.engine_config()),
        Err(e) => return fail(&model_file::render_model_error(&e)),
    };
    match query::run(&engine, &parsed) {
        Ok(outcome) => {
            println!("{}", output::query_result_json(&parsed, &outcome));
            0
        }
        Err(e) => {
            eprintln!("{}: {e}", error_class(&e));
            exit_code_for(&e)
        }
    }
}

fn cmd_oracle(model_path: &str, query_path: &str, knobs: &Knobs, draws: usize) -> u8 {
    let loaded = match load_model(model_path) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let Some(sem) = loaded.structural.clone() else {
        return fail("InvalidInput: the oracle needs a structural-mode model");
    };
    let qtext = match read_input(query_path) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let parsed = match query::parse(&qtext) {
        Ok(q) => q,
        Err(e) => return fail(&e),
    };
    if matches!(parsed.kind, QueryKind::Identify | QueryKind::Rank { .. }) {
        return fail("InvalidInput: the oracle compares counterfactual queries only");
    }
    let engine = match loaded.engine() {
        Ok(e) => e.with_config(knobs.engine_config()),
        Err(e) => return fail(&model_file::render_model_error(&e)),
    };
    let outcome = match query::run(&engine, &parsed) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{}: {e}", error_class(&e));
            return exit_code_for(&e);
        }
    };
    let QueryOutcome::Counterfactual { ref result, .. } = outcome else {
        return fail("InvalidInput: the oracle compares counterfactual queries only");
    };
    let plan = query::oracle_plan(&parsed, &outcome).expect("counterfactual query has a plan");

    let cfg = SimConfig {
        n_draws: draws,
        seed: knobs.seed,
        max_rejection_ratio: 1e4,
    };
    let est = match mc_counterfactual(&sem, &parsed.evidence, &plan, &parsed.y, &cfg) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{}: {e}", error_class(&e));
            return exit_code_for(&e);
        }
    };

    // 4-standard-error agreement, with a small floor for exact zero-SE cases
    let mean_tol = 4.0 * est.mean_se + 1e-9;
    let var_tol = 4.0 * est.variance_se + 1e-9;
    let pass = (result.y_mean - est.mean).abs() <= mean_tol
        && (result.y_var - est.variance).abs() <= var_tol;

    let echo = serde_json::to_string(&parsed.raw).unwrap();
    println!(
        "{}",
        output::oracle_comparison_json(&echo, result, &est, pass)
    );
    if pass {
        0
    } else {
        4
    }
}
