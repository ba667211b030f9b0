use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;
mod report;

/// Stripped-binary function retrieval across versions and architectures.
#[derive(Parser)]
#[command(name = "evopatch", version, about)]
struct Cli {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (defaults to available cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus
    Synth(commands::SynthArgs),
    /// Read ELF symbol tables into symbol-table files
    ExtractSymbols(commands::ExtractArgs),
    /// Validate feature exports and symbol tables into a corpus directory
    Ingest(commands::IngestArgs),
    /// Align stripped functions to labeled ones and write the anchor dump
    Align(commands::AlignArgs),
    /// Fit statistics, fuse embeddings and build prototypes for a cutoff
    BuildIndex(commands::BuildIndexArgs),
    /// Rank the functions of a target binary against one query function
    Query(commands::QueryArgs),
    /// Run the cross-architecture retrieval evaluation
    Eval(commands::EvalArgs),
    /// Hold-one-architecture-out patch-state classification
    PatchProxy(commands::PatchProxyArgs),
    /// Render summary tables and version trends from evaluation output
    Report(report::ReportArgs),
    /// Print the effective configuration as TOML
    Config,
}

fn error_record(kind: &str, err: &anyhow::Error) -> serde_json::Value {
    let context: Vec<String> = err.chain().skip(1).map(ToString::to_string).collect();
    json!({
        "error": {
            "kind": kind,
            "message": err.to_string(),
            "context": context,
        }
    })
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| e.downcast_ref::<evopatch::Error>())
        .map_or("Error", evopatch::Error::kind)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let level = if cli.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let config = match &cli.config {
        Some(path) => evopatch::config::Config::load(path)?,
        None => evopatch::config::Config::default(),
    };
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::ExtractSymbols(a) => commands::extract_symbols(a, &config),
        Command::Ingest(a) => commands::ingest(a, &config),
        Command::Align(a) => commands::align(a, &config),
        Command::BuildIndex(a) => commands::build_index(a, &config),
        Command::Query(a) => commands::query(a, &config),
        Command::Eval(a) => commands::eval(a, &config),
        Command::PatchProxy(a) => commands::patch_proxy(a, &config),
        Command::Report(a) => report::report(a),
        Command::Config => {
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let kind = match e.kind() {
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand => "UnknownCommand",
                _ => "Usage",
            };
            let err = anyhow::anyhow!(e.render().to_string().trim().to_string());
            eprintln!("{}", error_record(kind, &err));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_record(error_kind(&err), &err));
            ExitCode::FAILURE
        }
    }
}
