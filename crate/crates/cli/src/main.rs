use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use sfp_core::engine::StatePolicy;
use sfp_core::game::{self, GeneratorSpec};
use sfp_core::harness::{self, CompareThresholds, ExperimentManifest, RunSummary};
use sfp_core::oracle::{self, FiniteHorizonSolution, SolverParams};
use sfp_core::par::Execution;
use sfp_core::{Error, PerturbationSpec};

/// Output root used when neither `--out` nor the manifest names one.
const DEFAULT_OUT: &str = "sfp-out";

#[derive(Parser)]
#[command(name = "sfp", version, about = "Stochastic fictitious play for turn-based stochastic games")]
struct Cli {
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a game file and print a JSON report.
    Validate {
        #[arg(long)]
        game: PathBuf,
    },
    /// Draw a random valid game from a generator spec.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Game file to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the finite-horizon Nash distributions by backward induction.
    Oracle {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        tau: f64,
        /// Solution file to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every seed of a manifest and write one CSV and summary per seed.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Replaces the manifest's game source.
        #[arg(long)]
        game: Option<PathBuf>,
        /// Output directory. Falls back to the manifest, then SFP_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Runs this seed only.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tau: Option<f64>,
        /// Oracle horizon for the distance metrics.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// `continue` or `reset:<state>`.
        #[arg(long)]
        state_policy: Option<StatePolicy>,
    },
    /// Compare a run summary with an oracle solution.
    Compare {
        /// `run_<seed>.json` written by `run`.
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        /// Metric CSV to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest `m` compared; every recorded `m` when absent.
        #[arg(long)]
        max_m: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        max_pi_distance: f64,
        /// Defaults to 0.1 max |r|.
        #[arg(long)]
        max_q_error: Option<f64>,
        /// Also require the median distance of the last `n` checkpoints to
        /// be under half that of the first `n`.
        #[arg(long)]
        trend_window: Option<usize>,
    },
}

/// Error with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn validate(path: &Path) -> Result<u8, Failure> {
    let g = game::game_from_json(&read_file(path)?)?;
    let report = harness::validation_report(&g);
    print!("{}", pretty(&serde_json::to_value(&report).expect("report serializes")));
    Ok(if report.ok { 0 } else { 1 })
}

fn generate(spec: &Path, seed: u64, out: Option<&Path>) -> Result<u8, Failure> {
    let spec: GeneratorSpec = serde_json::from_str(&read_file(spec)?).map_err(Error::from)?;
    let g = game::generate_game(&spec, seed)?;
    emit(out, &game::game_to_json(&g))?;
    Ok(0)
}

fn solve(path: &Path, horizon: usize, tau: f64, seed: u64, out: Option<&Path>, exec: Execution) -> Result<u8, Failure> {
    let g = game::game_from_json(&read_file(path)?)?;
    let perturb = PerturbationSpec::entropy(tau)?;
    let params = SolverParams { seed, ..SolverParams::default() };
    let sol = oracle::backward_induction(&g, horizon, &perturb, &params, exec)?;
    let report = oracle::verify_solution(&g, &sol);
    let ok = report.passes(params.tolerance, 1e-12);
    emit(out, &sol.to_json())?;
    let summary = json!({
        "horizon": sol.horizon,
        "tau": sol.tau,
        "all_unique": sol.all_unique(),
        "max_residual": sol.max_residual(),
        "max_equivalence_residual": sol.max_equivalence_residual(),
        "verification": report,
        "ok": ok,
    });
    if out.is_some() {
        print!("{}", pretty(&summary));
    } else {
        eprint!("{}", pretty(&summary));
    }
    Ok(if ok { 0 } else { 1 })
}

struct RunOverrides {
    game: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    tau: Option<f64>,
    horizon: Option<usize>,
    checkpoint_every: Option<usize>,
    state_policy: Option<StatePolicy>,
}

fn run(path: &Path, o: RunOverrides, exec: Execution) -> Result<u8, Failure> {
    let (mut manifest, base) = ExperimentManifest::load(path)?;
    if let Some(g) = o.game {
        manifest.game = Some(std::env::current_dir().map_err(|e| io_failure(&g, e))?.join(g));
        manifest.generator = None;
    }
    if let Some(seed) = o.seed {
        manifest.seeds = vec![seed];
    }
    if let Some(tau) = o.tau {
        manifest.run.tau = tau;
    }
    if let Some(h) = o.horizon {
        manifest.oracle_horizon = Some(h);
    }
    if let Some(every) = o.checkpoint_every {
        manifest.run.checkpoint_every = every;
    }
    if let Some(policy) = o.state_policy {
        manifest.run.state_policy = policy;
    }
    let exp = manifest.prepare(&base)?;
    let out_dir = o
        .out
        .or_else(|| exp.output_dir.clone())
        .or_else(|| std::env::var_os("SFP_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let written = harness::run_experiment(&exp, &out_dir, exec)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(0)
}

struct CompareArgs {
    record: PathBuf,
    solution: PathBuf,
    out: Option<PathBuf>,
    max_m: Option<usize>,
    thresholds: CompareThresholds,
}

fn compare(a: CompareArgs) -> Result<u8, Failure> {
    let summary = RunSummary::from_json(&read_file(&a.record)?)?;
    let sol = FiniteHorizonSolution::from_json(&read_file(&a.solution)?)?;
    let table = oracle::compare(&summary.checkpoints, &sol, a.max_m)?;
    if let Some(out) = &a.out {
        write_file(out, &table.to_csv())?;
    }
    let verdict = harness::judge(&table, &sol, &a.thresholds);
    print!("{}", pretty(&serde_json::to_value(&verdict).expect("verdict serializes")));
    Ok(if verdict.pass { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = exec(cli.sequential);
    let result = match cli.command {
        Command::Validate { game } => validate(&game),
        Command::Generate { spec, seed, out } => generate(&spec, seed, out.as_deref()),
        Command::Oracle {
            game,
            horizon,
            tau,
            out,
            seed,
        } => solve(&game, horizon, tau, seed, out.as_deref(), exec),
        Command::Run {
            manifest,
            game,
            out,
            seed,
            tau,
            horizon,
            checkpoint_every,
            state_policy,
        } => run(
            &manifest,
            RunOverrides {
                game,
                out,
                seed,
                tau,
                horizon,
                checkpoint_every,
                state_policy,
            },
            exec,
        ),
        Command::Compare {
            record,
            solution,
            out,
            max_m,
            max_pi_distance,
            max_q_error,
            trend_window,
        } => compare(CompareArgs {
            record,
            solution,
            out,
            max_m,
            thresholds: CompareThresholds {
                max_pi_distance,
                max_q_error,
                trend_window,
            },
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
