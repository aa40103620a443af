use clap::{Args, Parser, Subcommand};
use gdsat::bench::{run_suite, write_artifacts};
use gdsat::cnf::format_solution;
use gdsat::grad::run_gradient_phase;
use gdsat::matrix::encode_problem;
use gdsat::{
    CnfFormula, HybridConfig, OptimizerConfig, SolveStatus,
};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

const EXIT_SAT: u8 = 10;
const EXIT_UNSAT: u8 = 20;
const EXIT_UNKNOWN: u8 = 0;

#[derive(Parser)]
#[command(name = "gdsat", about = "Gradient-guided hybrid SAT solver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a DIMACS CNF file.
    Solve(SolveArgs),
    /// Run hybrid and baseline over a directory of .cnf files.
    Bench(BenchArgs),
    /// Generate a random 3-SAT instance in DIMACS format.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Input DIMACS CNF file.
    input: PathBuf,
    /// Candidate assignments optimized in the gradient phase.
    #[arg(long, default_value_t = 256)]
    candidates: usize,
    /// Refinement worker count (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Smooth-min temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// Gradient-phase iteration cap.
    #[arg(long)]
    max_iters: Option<u64>,
    /// Global wall-clock timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Gradient-phase RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write a per-iteration trace CSV to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write versioned JSON run statistics to this path.
    #[arg(long)]
    json_stats: Option<PathBuf>,
    /// Baseline mode: skip the gradient phase, run one unseeded search.
    #[arg(long, conflicts_with = "gradient_only")]
    unseeded_only: bool,
    /// Run only the gradient phase (cannot prove UNSAT).
    #[arg(long)]
    gradient_only: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of .cnf files.
    directory: PathBuf,
    /// Per-instance timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value_t = 256)]
    candidates: usize,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for report.json and curves.csv.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of variables.
    #[arg(long, default_value_t = 100)]
    vars: usize,
    /// Clause-to-variable ratio.
    #[arg(long, default_value_t = 4.2)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Plant a hidden satisfying assignment.
    #[arg(long)]
    planted: bool,
    /// Output path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load_formula(path: &PathBuf) -> Result<CnfFormula, String> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| format!("{name}: {e}"))?;
    let formula = gdsat::cnf::parse_dimacs(&text, &name).map_err(|e| format!("{name}: {e}"))?;
    for w in formula.warnings() {
        eprintln!("c warning: {w}");
    }
    Ok(formula)
}

fn status_exit(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::Sat => ExitCode::from(EXIT_SAT),
        SolveStatus::Unsat => ExitCode::from(EXIT_UNSAT),
        _ => ExitCode::from(EXIT_UNKNOWN),
    }
}

fn status_label(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Sat => "SATISFIABLE",
        SolveStatus::Unsat => "UNSATISFIABLE",
        _ => "UNKNOWN",
    }
}

fn run_solve(args: &SolveArgs) -> Result<ExitCode, String> {
    let formula = load_formula(&args.input)?;
    let mut optimizer = OptimizerConfig::default();
    if let Some(tau) = args.tau {
        optimizer.tau = tau;
    }
    if let Some(iters) = args.max_iters {
        optimizer.max_iterations = iters;
    }
    if let Some(seed) = args.seed {
        optimizer.rng_seed = seed;
    }
    let mut config = HybridConfig {
        num_candidates: args.candidates,
        optimizer,
        global_timeout: args.timeout.map(Duration::from_secs_f64),
        ..HybridConfig::default()
    };
    if let Some(w) = args.workers {
        config.worker_count = w;
    }

    if args.unseeded_only {
        let out = gdsat::hybrid::solve_baseline(&formula, config.global_timeout);
        print!(
            "{}",
            format_solution(status_label(out.status), out.model.as_ref())
        );
        if let Some(path) = &args.json_stats {
            let json = serde_json::json!({
                "schema": 1,
                "instance": args.input.display().to_string(),
                "status": out.status,
                "mode": "unseeded-only",
                "stats": out.stats,
            });
            write_file(path, &serde_json::to_string_pretty(&json).unwrap())?;
        }
        return Ok(status_exit(out.status));
    }

    if args.gradient_only {
        config.optimizer.max_seconds = config
            .global_timeout
            .map(|t| t.as_secs_f64())
            .or(config.optimizer.max_seconds);
        let problem = encode_problem(&formula);
        let snapshot = run_gradient_phase(&problem, &config.optimizer, config.num_candidates);
        let status = match &snapshot.sat_model {
            Some(m) if gdsat::cnf::verify_model(&formula, m).unwrap_or(false) => SolveStatus::Sat,
            _ => SolveStatus::Unknown,
        };
        print!(
            "{}",
            format_solution(status_label(status), snapshot.sat_model.as_ref())
        );
        write_trace(args.trace.as_ref(), &snapshot.trace)?;
        if let Some(path) = &args.json_stats {
            let json = serde_json::json!({
                "schema": 1,
                "instance": args.input.display().to_string(),
                "status": status,
                "mode": "gradient-only",
                "iterations": snapshot.iterations,
                "converged": snapshot.converged,
                "final_loss": snapshot.loss_history.last(),
            });
            write_file(path, &serde_json::to_string_pretty(&json).unwrap())?;
        }
        return Ok(status_exit(status));
    }

    let result = gdsat::hybrid::solve_hybrid(&formula, &config)?;
    print!(
        "{}",
        format_solution(
            status_label(result.outcome.status),
            result.outcome.model.as_ref()
        )
    );
    if let Some(snapshot) = &result.snapshot {
        write_trace(args.trace.as_ref(), &snapshot.trace)?;
    }
    if let Some(path) = &args.json_stats {
        let json = result.stats_json(&args.input.display().to_string());
        write_file(path, &serde_json::to_string_pretty(&json).unwrap())?;
    }
    Ok(status_exit(result.outcome.status))
}

fn write_trace(path: Option<&PathBuf>, trace: &[gdsat::grad::TraceRow]) -> Result<(), String> {
    let Some(path) = path else { return Ok(()) };
    let mut out = String::from("iteration,lr,loss,best_fraction\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.iteration, row.lr, row.loss, row.best_fraction
        ));
    }
    write_file(path, &out)
}

fn write_file(path: &PathBuf, content: &str) -> Result<(), String> {
    let mut file =
        std::fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    file.write_all(content.as_bytes())
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn run_bench(args: &BenchArgs) -> Result<ExitCode, String> {
    let mut config = HybridConfig {
        num_candidates: args.candidates,
        ..HybridConfig::default()
    };
    if let Some(w) = args.workers {
        config.worker_count = w;
    }
    let report = run_suite(
        &args.directory,
        &config,
        Duration::from_secs_f64(args.timeout),
    )
    .map_err(|e| e.to_string())?;
    write_artifacts(&report, &args.out).map_err(|e| e.to_string())?;
    println!(
        "c suite of {} instances: PAR2 hybrid {:.3}, baseline {:.3}",
        report.records.len() / 2,
        report.par2_hybrid,
        report.par2_baseline
    );
    println!("c wrote {}", args.out.join("report.json").display());
    println!("c wrote {}", args.out.join("curves.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn run_generate(args: &GenerateArgs) -> Result<ExitCode, String> {
    let formula = if args.planted {
        gdsat::gen::planted_3sat(args.vars, args.ratio, args.seed).0
    } else {
        gdsat::gen::random_3sat(args.vars, args.ratio, args.seed)
    };
    let text = formula.to_dimacs();
    match &args.output {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Bench(args) => run_bench(args),
        Command::Generate(args) => run_generate(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
