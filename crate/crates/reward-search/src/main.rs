use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use reward_search::cli::{analyze_dir, cmd_calibrate, cmd_simulate, run_cells, RunConfig};

/// Reward-guided tree search over step-wise reasoning tasks.
#[derive(Parser)]
#[command(name = "rsearch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, problem, seed) cell of a config and persist the
    /// outcomes plus a manifest.
    Run(RunArgs),
    /// Build a synthetic scenario study, run it, and report.
    Simulate(SimulateArgs),
    /// Produce report files from a finished run directory.
    Analyze(AnalyzeArgs),
    /// Search for the prior whose predictive is closest to uniform.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent run cells.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Added to every seed in the config.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario regime: 1 (exact values), 2 (terminal-only), 3 (noisy).
    #[arg(long)]
    scenario: u8,
    #[arg(long, default_value_t = 4)]
    branching: usize,
    #[arg(long, default_value_t = 5)]
    depth: usize,
    /// Probability a leaf is correct.
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,
    /// Logit-space noise scale at maximal distance from the terminal level
    /// (scenario 3).
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    /// Comma-separated method strings.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Number of seeded trees (one problem each).
    #[arg(long)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run directory holding a manifest and outcome files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Grid resolution per dimension (>= 10).
    #[arg(long, default_value_t = 200)]
    resolution: usize,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // Quietly succeed when a downstream pager closes the pipe.
            if err
                .downcast_ref::<std::io::Error>()
                .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
            {
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Writes to stdout, surfacing broken pipes as errors instead of panics.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let mut config = RunConfig::load(&args.config)?;
            if args.seed_offset != 0 {
                for seed in &mut config.seeds {
                    *seed = seed.wrapping_add(args.seed_offset);
                }
            }
            let out = args
                .out
                .or_else(|| config.output_dir.clone())
                .ok_or_else(|| anyhow::anyhow!("no output dir: pass --out or set output_dir"))?;
            let manifest = run_cells(&config, &out, args.workers)?;
            emit(&format!(
                "wrote {} outcomes and {} to {}",
                manifest.cells.len(),
                reward_search::cli::MANIFEST_FILE,
                out.display()
            ))
        }
        Command::Simulate(args) => {
            let report = cmd_simulate(
                args.scenario,
                args.branching,
                args.depth,
                args.fraction,
                args.noise_sd,
                &args.methods,
                args.seeds,
                args.seed_offset,
                &args.out,
                args.workers,
            )?;
            let text_path = args.out.join(reward_search::cli::REPORT_TEXT);
            emit(std::fs::read_to_string(text_path)?.trim_end())?;
            let _ = report;
            Ok(())
        }
        Command::Analyze(args) => {
            analyze_dir(&args.out)?;
            emit(&format!(
                "wrote {}, {}, {} to {}",
                reward_search::cli::REPORT_JSON,
                reward_search::cli::REPORT_TEXT,
                reward_search::cli::CORRELATION_CSV,
                args.out.display()
            ))
        }
        Command::Calibrate(args) => emit(&cmd_calibrate(args.resolution)?),
    }
}
