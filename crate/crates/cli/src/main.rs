use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlts_ident::{exit, replay, resolve_threads, run, schema, CliError, Command};

#[derive(Parser)]
#[command(name = "nlts-ident", version, about = "Identifiability experiments for nonlinear time-series models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides NLTS_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one path per seed.
    Simulate(RunArgs),
    /// Fit a model to a CSV series or to simulated data.
    Fit(RunArgs),
    /// Search for observationally equivalent parameters.
    IdentScan(RunArgs),
    /// Probe the STGARCH partial-identification manifolds.
    PartialIdent(RunArgs),
    /// Gram-matrix independence of logistic families.
    LemmaCheck(RunArgs),
    /// Closed-form Laplace transforms against quadrature.
    LaplaceCheck(RunArgs),
    /// Sufficient stationarity conditions.
    Stationarity(RunArgs),
    /// Recover AGARCH (alpha, gamma) from the news-impact identity.
    AgarchDemo(RunArgs),
    /// Re-run a manifest and compare its outputs byte for byte.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print a published JSON schema (`config`, `manifest` or a command name).
    Schema {
        #[arg(default_value = "config")]
        name: String,
    },
}

fn run_command(command: Command, args: RunArgs) -> Result<i32, CliError> {
    let threads = resolve_threads(args.threads)?;
    let out = run(command, &args.config, args.out.as_deref(), threads)?;
    eprintln!(
        "{command}: wrote {} in {:.2} s",
        out.out_dir.display(),
        out.wall_time_seconds
    );
    println!("{}", out.report_path.display());
    Ok(exit::OK)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::IdentScan(a) => (Command::IdentScan, a),
        Cmd::PartialIdent(a) => (Command::PartialIdent, a),
        Cmd::LemmaCheck(a) => (Command::LemmaCheck, a),
        Cmd::LaplaceCheck(a) => (Command::LaplaceCheck, a),
        Cmd::Stationarity(a) => (Command::Stationarity, a),
        Cmd::AgarchDemo(a) => (Command::AgarchDemo, a),
        Cmd::Replay { manifest, threads } => {
            let outcome = replay(&manifest, resolve_threads(threads)?)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if outcome.identical {
                eprintln!("replay of {}: identical", outcome.command);
                return Ok(exit::OK);
            }
            for d in &outcome.differences {
                eprintln!("{d}");
            }
            return Err(CliError::Mismatch(format!(
                "{} file difference(s) after re-running {}",
                outcome.differences.len(),
                outcome.command
            )));
        }
        Cmd::Schema { name } => {
            let text = schema::text(&name).ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown schema {name:?}; available: {}",
                    schema::names().collect::<Vec<_>>().join(", ")
                ))
            })?;
            print!("{text}");
            return Ok(exit::OK);
        }
    };
    run_command(command, args)
}

fn main() -> ExitCode {
    let code = match dispatch(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nlts-ident: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
