//! `valuescope`: conceptualise value theories, analyse texts, evaluate
//! detection quality and serve the HTTP API.

mod commands;
mod render;
mod run_config;

use std::fmt;
use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use valuescope_core::config::ConfigError;
use valuescope_core::llm::GatewayError;
use valuescope_core::Flavor;

/// Bad invocation: a missing or out-of-range argument, or an invalid config.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "valuescope", version, about = "Theory-agnostic human value detection")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Flags win over `VALUESCOPE_*`
/// environment variables, which win over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Base URL of the inference backend, for every stage
    #[arg(long, global = true, value_name = "URL")]
    pub backend_url: Option<String>,
    /// openai_compatible, ollama_native or scripted
    #[arg(long, global = true)]
    pub flavor: Option<Flavor>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<i64>,
    /// Directory holding prompt template overrides
    #[arg(long, global = true, value_name = "DIR")]
    pub templates: Option<PathBuf>,
    /// Concurrent backend calls
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a theory specification from foundational documents
    Conceptualise(commands::ConceptualiseArgs),
    /// Detect and rate the values expressed in one text
    Detect(commands::DetectArgs),
    /// Score detection against a gold-labelled dataset
    Evaluate(commands::EvaluateArgs),
    /// Run the HTTP API until interrupted
    Serve(commands::ServeArgs),
    /// Convert the ValueEval sentence and label files to the canonical TSV
    ConvertValueeval(commands::ConvertArgs),
    /// Check a theory file against the specification invariants
    Validate(commands::ValidateArgs),
}

fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
}

/// The cause chain joined with ": ", skipping causes whose text an outer
/// message already includes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let is_usage = err.chain().any(|cause| {
        cause.is::<UsageError>()
            || cause.is::<ConfigError>()
            || matches!(cause.downcast_ref::<GatewayError>(), Some(GatewayError::InvalidConfig(_)))
    });
    if is_usage {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_tracing();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    let result = runtime.block_on(async {
        match cli.command {
            Command::Conceptualise(args) => commands::conceptualise(&cli.global, args).await,
            Command::Detect(args) => commands::detect(&cli.global, args).await,
            Command::Evaluate(args) => commands::evaluate(&cli.global, args).await,
            Command::Serve(args) => commands::serve(&cli.global, args).await,
            Command::ConvertValueeval(args) => commands::convert_valueeval(&cli.global, args),
            Command::Validate(args) => commands::validate(args),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
