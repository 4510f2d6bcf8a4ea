use clap::{Args, Parser, Subcommand};
use qpc_cli::{emit_plot_data, run, JobKind};
use std::path::PathBuf;
use std::process::ExitCode;

/// Thread count used when `--threads` is absent.
const THREADS_ENV: &str = "QPC_THREADS";

#[derive(Parser)]
#[command(name = "qpc", version, about = "Experiments on quasi-periodic SL(2,R) cocycles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct JobArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for result.json, CSV tables and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: $QPC_THREADS, else all logical cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Quadrature grid size K, overriding the config.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the frequency against the Diophantine-type conditions.
    Classify(JobArgs),
    /// Finite-scale Lyapunov exponents L_N.
    Le(JobArgs),
    /// Large-deviation fractions at given scales.
    Ldt(JobArgs),
    /// Fit the large-deviation constant over several windows.
    Calibrate(JobArgs),
    /// Build and certify the multi-scale schedule.
    Schedule(JobArgs),
    /// Two-scale defect against its bound.
    Twoscale(JobArgs),
    /// Extrapolation error along schedules.
    Extrapolate(JobArgs),
    /// Energy sweep of the extrapolant and its modulus of continuity.
    Probe(JobArgs),
    /// Long-format plot data from finished job directories.
    Plot {
        /// Job output directories.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| format!("{THREADS_ENV} must be a thread count, got {v:?}")),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (job, args) = match cli.command {
        Command::Classify(a) => (JobKind::Classify, a),
        Command::Le(a) => (JobKind::Le, a),
        Command::Ldt(a) => (JobKind::Ldt, a),
        Command::Calibrate(a) => (JobKind::Calibrate, a),
        Command::Schedule(a) => (JobKind::Schedule, a),
        Command::Twoscale(a) => (JobKind::Twoscale, a),
        Command::Extrapolate(a) => (JobKind::Extrapolate, a),
        Command::Probe(a) => (JobKind::Probe, a),
        Command::Plot { results, out } => {
            return match emit_plot_data(&results, &out) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code())
                }
            };
        }
    };
    match threads(args.threads) {
        Ok(Some(0)) => {
            eprintln!("error: thread count must be positive");
            return ExitCode::from(1);
        }
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: cannot start {n} threads: {e}");
                return ExitCode::from(1);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(job, &args.config, &args.out, args.grid) {
        Ok(m) => {
            println!("{} finished in {:.0} ms; artifacts in {}", job.name(), m.wall_time_ms, args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
