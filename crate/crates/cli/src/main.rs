use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridse::estimator::{quantiles_to_csv, WrssReport};
use gridse::measurement::{greedy_placement, validate_observability, PmuPlacement};
use gridse::pipeline::{
    emit_boxplot_data, load_case, resolve_placement, run_pipeline, synthesize, write_all, RunConfig, StageError,
    POWER_FLOW_TOLERANCE,
};
use gridse::power::powerflow::DEFAULT_MAX_ITERATIONS;
use gridse::power::solve_power_flow;
use gridse::{Error, ErrorClass};
use serde_json::json;

#[derive(Parser)]
#[command(name = "gridse", version, about = "PMU state estimation experiments: WLS, GBP, GNN and edge-delay simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Replaces every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CaseArgs {
    /// Bundled case name or case file; defaults to the configuration's case.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CaseCommand {
    /// Checks a case file against the schema and prints a summary.
    Validate {
        /// Bundled case name or case file.
        case: String,
    },
}

#[derive(Subcommand)]
enum Command {
    #[command(subcommand)]
    Case(CaseCommand),
    /// Solves the base-case power flow.
    Powerflow(CaseArgs),
    /// Chooses PMU buses (bundled, greedy or from the configuration) and checks observability.
    Place {
        #[command(flatten)]
        case: CaseArgs,
        /// Use the greedy cover instead of the configured placement.
        #[arg(long)]
        greedy: bool,
    },
    /// Synthesizes the scenario: measurements plus a training dataset with exact states.
    Synth(RunArgs),
    /// Runs the configured estimators and writes WRSS tables.
    Estimate(RunArgs),
    /// Runs the estimators across edge agents and writes timing tables as well.
    Simulate(RunArgs),
    /// Box-plot table of an existing WRSS table, or a full run with `--config`.
    Report {
        /// WRSS table written by `estimate` or `simulate`.
        #[arg(long, conflicts_with = "config")]
        wrss: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(e.class()),
            message: e.to_string(),
        }
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure {
            code: exit_code(e.class()),
            message: e.to_string(),
        }
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 1,
        ErrorClass::Numeric => 2,
    }
}

type CliResult = Result<(), Failure>;

fn load_config(path: &Path, seed: Option<u64>, out: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    if let Some(o) = out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn case_config(args: &CaseArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match (&args.config, &args.case) {
        (Some(path), _) => RunConfig::from_file(path)?,
        (None, Some(case)) => RunConfig::for_case(case.clone()),
        (None, None) => return Err(Error::Config("give --case or --config".into()).into()),
    };
    if let Some(case) = &args.case {
        cfg.case = case.clone();
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn case_validate(case: &str) -> CliResult {
    let sys = load_case(case)?;
    println!(
        "{}: {} buses, {} branches, slack bus {}, {}",
        sys.name.as_deref().unwrap_or(case),
        sys.bus_count(),
        sys.branches.len(),
        sys.original_ids[sys.slack],
        if sys.is_connected() { "connected" } else { "not connected" }
    );
    Ok(())
}

fn powerflow(args: &CaseArgs) -> CliResult {
    let cfg = case_config(args)?;
    let sys = load_case(&cfg.case)?;
    let sol = solve_power_flow(&sys, POWER_FLOW_TOLERANCE, DEFAULT_MAX_ITERATIONS)?;
    println!("converged in {} iterations, mismatch {:.3e}", sol.iterations, sol.mismatch);
    if args.out.is_some() || args.config.is_some() {
        let v = sol.state.to_complex();
        let doc = json!({
            "case": sys.name,
            "iterations": sol.iterations,
            "mismatch": sol.mismatch,
            "bus_ids": sys.original_ids,
            "magnitude": v.iter().map(|c| c.norm()).collect::<Vec<_>>(),
            "angle": v.iter().map(|c| c.arg()).collect::<Vec<_>>(),
            "state": sol.state.values(),
        });
        announce(&write_all(&cfg.output_dir, &[("powerflow.json", doc.to_string())])?);
    }
    Ok(())
}

fn place(args: &CaseArgs, greedy: bool) -> CliResult {
    let cfg = case_config(args)?;
    let sys = load_case(&cfg.case)?;
    let placement: PmuPlacement = if greedy {
        greedy_placement(&sys)
    } else {
        resolve_placement(&cfg.placement, &sys)?
    };
    let observable = validate_observability(&placement, &sys);
    let ids = placement.original_ids(&sys);
    println!("{} PMUs at buses {:?}; observable: {observable}", ids.len(), ids);
    if args.out.is_some() || args.config.is_some() {
        let doc = json!({ "case": sys.name, "buses": ids, "provenance": placement.provenance, "observable": observable });
        announce(&write_all(&cfg.output_dir, &[("placement.json", doc.to_string())])?);
    }
    if observable {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            message: "placement does not make the system observable".into(),
        })
    }
}

fn synth(args: &RunArgs) -> CliResult {
    let cfg = load_config(&args.config, args.seed, args.out.as_ref())?;
    let syn = synthesize(&cfg)?;
    let dataset = serde_json::to_string(&syn.dataset(&cfg)).map_err(Error::from)?;
    let files = [
        ("measurements.json", syn.measurements.to_json(&syn.system)),
        ("dataset.json", dataset),
    ];
    announce(&write_all(&cfg.output_dir, &files)?);
    Ok(())
}

fn estimate(args: &RunArgs, timing: bool) -> CliResult {
    let cfg = load_config(&args.config, args.seed, args.out.as_ref())?;
    let out = run_pipeline(&cfg)?;
    for q in &out.quantiles {
        println!(
            "{}@{}: median {:.6} [{:.6}, {:.6}] n={}",
            q.method, q.iteration, q.median, q.min, q.max, q.count
        );
    }
    if timing {
        if let Some(d) = &out.deadline {
            println!(
                "deadline {} ms met in {}/{} frames",
                d.period_ms,
                d.met,
                d.flags.len()
            );
        }
    }
    announce(&out.write(&cfg.output_dir, timing)?);
    Ok(())
}

fn report(wrss: Option<&PathBuf>, config: Option<&PathBuf>, seed: Option<u64>, out: Option<&PathBuf>) -> CliResult {
    match (wrss, config) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let table = quantiles_to_csv(&emit_boxplot_data(&WrssReport::from_csv(&text)?)?);
            match out {
                Some(dir) => announce(&write_all(dir, &[("quantiles.csv", table)])?),
                None => print!("{table}"),
            }
            Ok(())
        }
        (None, Some(cfg)) => estimate(
            &RunArgs {
                config: cfg.clone(),
                seed,
                out: out.cloned(),
            },
            true,
        ),
        (None, None) => Err(Error::Config("give --wrss or --config".into()).into()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Case(CaseCommand::Validate { case }) => case_validate(case),
        Command::Powerflow(args) => powerflow(args),
        Command::Place { case, greedy } => place(case, *greedy),
        Command::Synth(args) => synth(args),
        Command::Estimate(args) => estimate(args, false),
        Command::Simulate(args) => estimate(args, true),
        Command::Report {
            wrss,
            config,
            seed,
            out,
        } => report(wrss.as_ref(), config.as_ref(), *seed, out.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
