use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use metasel::commands::{self, Context};
use metasel::config::{self, RunConfig};
use metasel::error::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "metasel",
    version,
    about = "Hierarchical feature selection and site meta-analysis"
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Configuration override `key=value`; may repeat.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check the inputs, print a JSON summary.
    Validate,
    /// Generate a synthetic multi-site study.
    Synth,
    /// Run hierarchical GA selection on every site and write the report.
    Select,
    /// Subsample every site and pair site metrics with accuracy.
    Bootstrap,
    /// Correlate every metric with accuracy.
    Correlate,
    /// Embed the sites' scan conditions with t-SNE.
    Embed,
    /// Bundle all artifacts into one JSON file.
    Report,
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides = Vec::new();
    for s in &cli.set {
        let (k, v) = config::split_pair(s)
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {s:?}")))?;
        overrides.push((k.to_string(), v.to_string()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::create_dir_all(&cli.out_dir).map_err(|source| CliError::Io {
        path: cli.out_dir.clone(),
        source,
    })?;
    let ctx = Context::new(cfg, cli.out_dir);
    match cli.command {
        Command::Validate => {
            let summary = commands::validate(&ctx)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("json value")
            );
            Ok(())
        }
        Command::Synth => commands::synth(&ctx),
        Command::Select => commands::select(&ctx),
        Command::Bootstrap => commands::bootstrap(&ctx),
        Command::Correlate => commands::correlate_cmd(&ctx),
        Command::Embed => commands::embed(&ctx),
        Command::Report => commands::report(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
