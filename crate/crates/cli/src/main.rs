//! `ktuple`: sparsest critical k-tuples from the command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 results were
//! produced but a cut enumeration was truncated or an exact search ran out
//! of nodes.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ktuple_core::{
    big_m, load_case, membership_report, protected_set_constraint, removal_sweep, timing_csv,
    timing_report, ExactOptions, ExactSolver, MilpModel, MinCutOptions, MinCutSolver, RemovalKind, RowIndexSet,
    ScenarioConfig, SolverChoice, DEFAULT_NODE_BUDGET,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "ktuple", version, about = "Sparsest critical measurement tuples of DC power-flow networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// `builtin:<name>` or a JSON case file.
    #[arg(long)]
    case: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = ktuple_core::mincut::DEFAULT_CUT_CAP)]
    cut_cap: usize,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Sparsest critical tuple for one measurement (0-based row).
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        anchor: usize,
        #[arg(long, default_value = "both")]
        method: SolverChoice,
        /// Rows that cannot be removed (exact solver only).
        #[arg(long, value_delimiter = ',')]
        protected: Vec<usize>,
    },
    /// Random measurement-removal study.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "lines")]
        removal: RemovalKind,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        ensembles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "both")]
        solver: SolverChoice,
        /// Replace the case metering with this many flow meters per line.
        #[arg(long)]
        meters_per_line: Option<usize>,
        /// With --meters-per-line: leave bus injections unmetered.
        #[arg(long)]
        no_injections: bool,
    },
    /// How many distinct critical tuples contain each measurement.
    Membership {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "mincut")]
        solver: SolverChoice,
    },
    /// Big-M model in LP format for an external MILP solver.
    ExportMilp {
        #[arg(long)]
        case: String,
        #[arg(long)]
        anchor: usize,
        #[arg(long, default_value_t = 100)]
        big_m: i64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        protected: Vec<usize>,
    },
    /// Wall-clock time over all anchors, per case and solver.
    Timing {
        #[arg(long, value_delimiter = ',', required = true)]
        cases: Vec<String>,
        #[arg(long, default_value = "both")]
        solver: SolverChoice,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = ktuple_core::mincut::DEFAULT_CUT_CAP)]
        cut_cap: usize,
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        node_budget: u64,
    },
    /// Measurement Jacobian as CSV.
    Jacobian {
        #[arg(long)]
        case: String,
    },
}

enum Failure {
    Invalid(anyhow::Error),
    Io(anyhow::Error),
    /// Nothing to report because a budget ran out.
    Exhausted(anyhow::Error),
}

type Outcome = Result<bool, Failure>;

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

fn emit(text: String, output: Option<&PathBuf>) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(Failure::Io),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(v: &impl ktuple_core::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize") + "\n"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(3),
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Exhausted(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

/// `Ok(true)` when some result is incomplete (truncation or budget).
fn run(command: Command) -> Outcome {
    match command {
        Command::Solve {
            common,
            anchor,
            method,
            protected,
        } => solve(&common, anchor, method, protected),
        Command::Sweep {
            common,
            removal,
            fractions,
            ensembles,
            seed,
            solver,
            meters_per_line,
            no_injections,
        } => {
            let cfg = ScenarioConfig {
                meters_per_line,
                include_all_injections: !no_injections,
                removal_kind: removal,
                rng_seed: seed,
                solver,
                cut_cap: common.cut_cap,
                node_budget: common.node_budget,
                ..ScenarioConfig::new(common.case.clone())
            };
            let report = removal_sweep(&cfg, &fractions, ensembles).map_err(invalid)?;
            let text = match common.format {
                Format::Json => json_text(&report),
                Format::Csv => report.to_csv(),
            };
            emit(text, common.output.as_ref())?;
            Ok(report.truncated || report.budget_exhausted)
        }
        Command::Membership { common, solver } => {
            let case = load_case(&common.case).map_err(invalid)?;
            let report = membership_report(&case, &common.case, solver, common.cut_cap, common.node_budget);
            let text = match common.format {
                Format::Json => json_text(&report),
                Format::Csv => report.to_csv(),
            };
            emit(text, common.output.as_ref())?;
            Ok(report.truncated || report.budget_exhausted)
        }
        Command::ExportMilp {
            case,
            anchor,
            big_m: m,
            out,
            protected,
        } => {
            let case = load_case(&case).map_err(invalid)?;
            let h = case.jacobian();
            let mut model = MilpModel::new(&h, anchor, big_m(m)).map_err(invalid)?;
            if !protected.is_empty() {
                model = protected_set_constraint(&model, &RowIndexSet::from(protected)).map_err(invalid)?;
            }
            model.write(&out).map_err(|e| Failure::Io(e.into()))?;
            Ok(false)
        }
        Command::Timing {
            cases,
            solver,
            format,
            output,
            cut_cap,
            node_budget,
        } => {
            let rows = timing_report(&cases, solver, cut_cap, node_budget).map_err(invalid)?;
            let text = match format {
                Format::Json => json_text(&rows),
                Format::Csv => timing_csv(&rows),
            };
            emit(text, output.as_ref())?;
            Ok(rows.iter().any(|r| r.truncated > 0 || r.budget_exhausted > 0))
        }
        Command::Jacobian { case } => {
            let case = load_case(&case).map_err(invalid)?;
            let labels: Vec<String> = (0..case.measurements.len())
                .map(|r| case.measurements.describe(&case.network, r))
                .collect();
            emit(case.jacobian().to_csv(&labels), None)?;
            Ok(false)
        }
    }
}

fn solve(common: &Common, anchor: usize, method: SolverChoice, protected: Vec<usize>) -> Outcome {
    let case = load_case(&common.case).map_err(invalid)?;
    let h = case.jacobian();
    if anchor >= h.rows() {
        return Err(invalid(anyhow!("anchor row {anchor} out of range (m = {})", h.rows())));
    }
    let mut incomplete = false;
    let mut out = json!({
        "case": common.case,
        "anchor": anchor,
        "measurement": case.measurements.describe(&case.network, anchor),
    });
    let mut csv_rows: Vec<[String; 4]> = Vec::new();
    if method.mincut() {
        let res = MinCutSolver::new(&case, &h)
            .solve(anchor, &MinCutOptions { cut_cap: common.cut_cap })
            .map_err(invalid)?;
        incomplete |= res.truncated;
        csv_rows.push(["mincut".into(), res.estimate.to_string(), res.tuple.cardinality.to_string(), join(&res.tuple.rows)]);
        out["mincut"] = serde_json::to_value(&res).expect("serializes");
    }
    if method.exact() {
        let opts = ExactOptions {
            node_budget: common.node_budget,
            protected: RowIndexSet::from(protected),
            ..ExactOptions::default()
        };
        let sol = ExactSolver::new(&h).solve(anchor, &opts).map_err(|e| match e {
            ktuple_core::ExactError::BudgetExhausted { .. } => Failure::Exhausted(anyhow!(e)),
            e => invalid(e),
        })?;
        incomplete |= !sol.proved_optimal;
        let support = sol.support.as_slice().to_vec();
        csv_rows.push(["exact".into(), sol.cardinality.to_string(), sol.cardinality.to_string(), join(&support)]);
        out["exact"] = serde_json::to_value(sol.record()).expect("serializes");
    }
    let text = match common.format {
        Format::Json => json_text(&out),
        Format::Csv => {
            let mut s = String::from("method,k,tuple_k,rows\n");
            for r in csv_rows {
                s.push_str(&format!("{},{},{},\"{}\"\n", r[0], r[1], r[2], r[3]));
            }
            s
        }
    };
    emit(text, common.output.as_ref())?;
    Ok(incomplete)
}

fn join(rows: &[usize]) -> String {
    rows.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}
