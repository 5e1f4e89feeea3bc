use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dashcoach_core::catalog::{load_catalog, Catalog};
use dashcoach_core::harness::{cmd_coach, cmd_evaluate, cmd_ingest, HarnessConfig};
use tracing_subscriber::EnvFilter;

/// Dashcam driver-behavior evaluation and coaching.
#[derive(Parser)]
#[command(name = "dashcoach", version)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract, resize and merge frames into the cache.
    Ingest(IngestArgs),
    /// Score model endpoints on the test split.
    Evaluate(EvaluateArgs),
    /// Write a coaching report for one clip.
    Coach(CoachArgs),
    /// Print the instruction catalog as JSON.
    ExportCatalog {
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    gold: Option<PathBuf>,
    /// NAME=URL, repeatable.
    #[arg(long = "endpoint")]
    endpoints: Vec<String>,
    #[arg(long)]
    embed_endpoint: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_in_flight: Option<usize>,
}

#[derive(Args)]
struct CoachArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    clip: String,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// URL or NAME=URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Have the model rewrite the templated report.
    #[arg(long)]
    llm: bool,
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl Common {
    fn apply(self, config: &mut HarnessConfig) {
        set(&mut config.manifest, self.manifest);
        set(&mut config.policy, self.policy);
        set(&mut config.cache_dir, self.cache_dir);
    }
}

/// Writes to stdout, treating a closed pipe (e.g. `| head`) as success.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn endpoints(specs: &[String]) -> Result<Vec<(String, String)>> {
    specs
        .iter()
        .map(|s| HarnessConfig::parse_endpoint(s).map_err(Into::into))
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => HarnessConfig::load(path)?,
        None => HarnessConfig::default(),
    };
    match cli.command {
        Command::Ingest(args) => {
            args.common.apply(&mut config);
            let summary = cmd_ingest(&config)?;
            emit(&format!(
                "extracted {}, cached {}, failed {}\n",
                summary.extracted.len(),
                summary.cached.len(),
                summary.failures.len()
            ))?;
            for (clip, err) in &summary.failures {
                eprintln!("{clip}: {err}");
            }
            Ok(if summary.is_ok() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Evaluate(args) => {
            args.common.apply(&mut config);
            set(&mut config.catalog, args.catalog);
            set(&mut config.rules, args.rules);
            set(&mut config.gold, args.gold);
            set(&mut config.out, args.out);
            set(&mut config.embed_endpoint, args.embed_endpoint);
            if !args.endpoints.is_empty() {
                config.endpoints = endpoints(&args.endpoints)?.into_iter().collect();
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            if let Some(n) = args.max_in_flight {
                config.max_in_flight = n;
            }
            let report = cmd_evaluate(&config)?;
            emit(&report.tables())?;
            let failed = report.failed_turns();
            if failed > 0 {
                eprintln!("{failed} turn(s) failed; see the per-item records");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Coach(args) => {
            args.common.apply(&mut config);
            set(&mut config.db, args.db);
            set(&mut config.catalog, args.catalog);
            set(&mut config.out, args.out);
            if let Some(spec) = args.endpoint {
                config.endpoints = endpoints(&[spec])?.into_iter().collect();
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            config.compose_with_llm |= args.llm;
            let outcome = cmd_coach(&config, &args.clip)?;
            emit(&outcome.report.to_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportCatalog { catalog } => {
            let catalog = match catalog.or(config.catalog) {
                Some(path) => load_catalog(&path).with_context(|| format!("loading {}", path.display()))?,
                None => Catalog::default(),
            };
            emit(&format!("{}\n", catalog.to_json()))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
