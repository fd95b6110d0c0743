use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use harness_cli::commands::{cmd_budget, cmd_postproc, cmd_simulate, cmd_skr, cmd_sweep, cmd_thresholds};
use harness_cli::report::Output;
use harness_cli::{CliError, Result, Scenario};
use ratecalc_lca::params::Method;

#[derive(Parser)]
#[command(name = "cvqkd", version, about = "Four-state CV-QKD key rates, noise budgets, simulation and post-processing")]
struct Cli {
    /// Scenario file (TOML, or JSON by extension). Defaults to the
    /// reference desk setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the scenario's method list.
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    /// Directory for report.json, CSV tables and gnuplot scripts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of simulated blocks.
    #[arg(long, global = true)]
    blocks: Option<usize>,
    /// Writes every simulated frame, its ground truth and the recovered
    /// symbols here.
    #[arg(long, global = true)]
    dump_frames: Option<PathBuf>,
    /// Prints report.json instead of the summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lca,
    Sdp,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Secret key rates at every scenario point.
    Skr {
        /// Instead sweep `distance start:stop:step` (km).
        #[arg(long, num_args = 2, value_names = ["distance", "RANGE"])]
        sweep: Option<Vec<String>>,
    },
    /// Excess-noise budget per point.
    Budget,
    /// Closed-loop excess-noise estimation campaign.
    Simulate,
    /// Reconciliation, verification and privacy amplification.
    Postproc,
    /// Excess noise at which the key rate vanishes.
    Thresholds,
    /// Key rate against distance.
    Sweep {
        /// `start:stop:step` in km; defaults to the scenario's sweep range.
        #[arg(long)]
        distance: Option<String>,
    },
    /// Prints the resolved scenario as JSON.
    Config,
}

fn run(cli: &Cli) -> Result<Option<Output>> {
    let mut s = match &cli.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(b) = cli.blocks {
        s.sim.blocks = b;
        s.postproc.blocks = b;
        s.postproc.gaussian_frames = b;
    }
    s.validate()?;
    let methods = match cli.method {
        None => s.methods.clone(),
        Some(MethodArg::Lca) => vec![Method::Lca],
        Some(MethodArg::Sdp) => vec![Method::Sdp],
        Some(MethodArg::Both) => vec![Method::Lca, Method::Sdp],
    };
    let out = match &cli.command {
        Command::Skr { sweep: None } => cmd_skr(&s, &methods)?,
        Command::Skr { sweep: Some(v) } => {
            if v[0] != "distance" {
                return Err(CliError::Config(format!("can only sweep `distance`, not `{}`", v[0])));
            }
            cmd_sweep(&s, &methods, Some(&v[1]))?
        }
        Command::Budget => cmd_budget(&s)?,
        Command::Simulate => cmd_simulate(&s, &methods, None, cli.dump_frames.as_deref())?,
        Command::Postproc => cmd_postproc(&s)?,
        Command::Thresholds => cmd_thresholds(&s, &methods)?,
        Command::Sweep { distance } => cmd_sweep(&s, &methods, distance.as_deref())?,
        Command::Config => {
            emit(&format!("{}\n", s.to_json()));
            return Ok(None);
        }
    };
    Ok(Some(out))
}

/// Writes to stdout, tolerating a closed pipe (`cvqkd ... | head`).
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(out)) => {
            if let Some(dir) = &cli.out {
                if let Err(e) = out.write_to(dir) {
                    eprintln!("error: {e}");
                    return ExitCode::from(e.exit_code() as u8);
                }
            }
            if cli.json {
                emit(&format!("{}\n", out.report_json));
            } else {
                emit(&out.summary);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
