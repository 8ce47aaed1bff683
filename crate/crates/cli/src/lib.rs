//! Config-driven experiment runner over `nlts-core`.
//!
//! Every command reads one JSON config, writes `report.json`, any CSV
//! artifacts and `manifest.json` into a single output directory, and maps
//! failures to a process exit code. [`replay`] re-executes a manifest and
//! byte-compares the reports.

pub mod commands;
pub mod config;
pub mod input;
pub mod manifest;
pub mod schema;

use std::path::{Path, PathBuf};
use std::time::Instant;

use nlts_core::ErrorKind;

pub use config::{Command, ExperimentConfig, RunControls};
pub use manifest::{replay, Manifest, ReplayOutcome};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "NLTS_THREADS";

pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const REFUSAL: i32 = 4;
    pub const MISMATCH: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("refused: {0}")]
    Refusal(String),
    #[error("replay mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Refusal(_) => exit::REFUSAL,
            CliError::Mismatch(_) => exit::MISMATCH,
        }
    }

    pub(crate) fn io(what: &str, path: &Path, e: std::io::Error) -> Self {
        CliError::Validation(format!("{what} {}: {e}", path.display()))
    }
}

impl From<nlts_core::Error> for CliError {
    fn from(e: nlts_core::Error) -> Self {
        let msg = e.to_string();
        match e.kind() {
            ErrorKind::Validation => CliError::Validation(msg),
            ErrorKind::Numerical => CliError::Numerical(msg),
            ErrorKind::Refusal => CliError::Refusal(msg),
        }
    }
}

/// Thread count: the explicit value, else `NLTS_THREADS`, else rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Validation(format!("{THREADS_ENV}={s:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

pub(crate) fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<(T, usize), CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b
        .build()
        .map_err(|e| CliError::Numerical(format!("cannot start thread pool: {e}")))?;
    let used = pool.current_num_threads();
    pool.install(f).map(|v| (v, used))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
    pub wall_time_seconds: f64,
}

/// Loads the config at `config_path` and runs `command` against it.
pub fn run(
    command: Command,
    config_path: &Path,
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<RunOutcome, CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| CliError::io("cannot read config", config_path, e))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
    let config_dir = config_path
        .parent()
        .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
        .unwrap_or(Path::new("."));
    let config_dir = std::path::absolute(config_dir).map_err(|e| CliError::io("cannot resolve", config_dir, e))?;
    let out_dir = match out {
        Some(o) => o.to_path_buf(),
        None => {
            let cfg = parse_value(&raw)?;
            let o = cfg.output_dir.ok_or_else(|| {
                CliError::Validation("config has no output_dir and --out was not given".into())
            })?;
            config_dir.join(o)
        }
    };
    run_value(command, raw, &config_dir, &out_dir, threads)
}

fn parse_value(raw: &serde_json::Value) -> Result<ExperimentConfig, CliError> {
    schema::validate_config(raw)?;
    serde_json::from_value(raw.clone()).map_err(|e| CliError::Validation(format!("config: {e}")))
}

/// Runs an already-parsed config document; relative paths inside it resolve against `config_dir`.
pub fn run_value(
    command: Command,
    raw: serde_json::Value,
    config_dir: &Path,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<RunOutcome, CliError> {
    let cfg = parse_value(&raw)?;
    if cfg.schema_version != config::SCHEMA_VERSION {
        return Err(CliError::Validation(format!(
            "config: schema_version {} is not supported (expected {})",
            cfg.schema_version,
            config::SCHEMA_VERSION
        )));
    }
    if cfg.command != command {
        return Err(CliError::Validation(format!(
            "config is for `{}` but `{command}` was invoked",
            cfg.command
        )));
    }
    let ctx = commands::Context {
        config_dir: config_dir.to_path_buf(),
    };
    let start = Instant::now();
    let (output, used) = with_pool(threads, || commands::execute(&cfg, &ctx))?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io("cannot create output directory", out_dir, e))?;
    let mut files = Vec::new();
    let report_bytes = output.report;
    let report_path = out_dir.join(manifest::REPORT_FILE);
    manifest::write_file(&report_path, &report_bytes)?;
    files.push(manifest::FileEntry::new(manifest::REPORT_FILE, &report_bytes));
    for (name, bytes) in &output.artifacts {
        manifest::write_file(&out_dir.join(name), bytes)?;
        files.push(manifest::FileEntry::new(name, bytes));
    }
    let m = Manifest::new(command, raw, config_dir, files, wall, used);
    let manifest_path = out_dir.join(manifest::MANIFEST_FILE);
    manifest::write_file(&manifest_path, &m.to_bytes()?)?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        report_path,
        manifest_path,
        wall_time_seconds: wall,
    })
}
