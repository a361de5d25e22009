use anyhow::Result;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use promptcloak::commands;
use promptcloak::config::Config;
use std::path::PathBuf;
use std::process::ExitCode;

fn config_keys_help() -> String {
    let cfg = Config::default();
    let mut help = String::from(
        "Configuration keys (defaults shown; set via config file, PROMPTCLOAK_<KEY> \
         environment variables, or --set KEY=VALUE):\n",
    );
    for line in cfg.to_file_string().lines().skip(1) {
        help.push_str("  ");
        help.push_str(line);
        help.push('\n');
    }
    help
}

#[derive(Parser)]
#[command(
    name = "promptcloak",
    version,
    about = "Privacy gateway for LLM code assistants: learned prompt manipulation, \
             training pipeline, coding simulator and leakage evaluation"
)]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Master seed; every subcommand except live serve is reproducible under it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a prompt dataset by simulating coding sessions over repositories.
    Simulate(SimulateArgs),
    /// Train the manipulation policy against the configured assistant.
    Train(TrainArgs),
    /// Run the manipulation loop on one prompt and print the action trace.
    Manipulate(ManipulateArgs),
    /// Run the gateway service until interrupted.
    Serve(ServeArgs),
    /// Compute similarity metrics for (reference, hypothesis) pairs.
    Metrics(MetricsArgs),
    /// Rebuild source files from a captured prompt log.
    Reconstruct(ReconstructArgs),
    /// End-to-end leakage evaluation, with and/or without the gateway.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Repository root (repeatable).
    #[arg(long, required = true)]
    repo: Vec<PathBuf>,
    /// Simulated sessions per repository.
    #[arg(long, default_value_t = 3)]
    sessions: usize,
    /// Output dataset (line-delimited JSON prompt records).
    #[arg(long)]
    out: PathBuf,
    /// Keep only prompts containing more than four functions.
    #[arg(long)]
    filter_functions: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Prompt dataset produced by `simulate`.
    #[arg(long)]
    dataset: PathBuf,
    /// Output checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration metrics log (line-delimited JSON); also echoed to stderr.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct ManipulateArgs {
    /// Prompt text file.
    #[arg(long)]
    prompt: PathBuf,
    /// Trained policy checkpoint.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Use the random baseline policy instead of a checkpoint.
    #[arg(long)]
    random: bool,
    #[arg(long)]
    cursor_line: Option<usize>,
    #[arg(long)]
    cursor_col: Option<usize>,
}

#[derive(Args)]
struct ServeArgs {
    /// Listen address override.
    #[arg(long)]
    listen: Option<String>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Reference file or directory.
    #[arg(long)]
    reference: PathBuf,
    /// Hypothesis file or directory (matched by relative path).
    #[arg(long)]
    hypothesis: PathBuf,
    /// Output file for the metric records; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Capture log (line-delimited JSON prompt records).
    #[arg(long)]
    log: PathBuf,
    /// Directory for the reconstructed files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    with_mitigation: bool,
    #[arg(long)]
    without_mitigation: bool,
    /// Trained policy for the mitigated arm; the random baseline when omitted.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Sessions per corpus file.
    #[arg(long, default_value_t = 2)]
    sessions: usize,
    /// Output file for the leakage records; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn error_record(kind: &str, error: &str) {
    eprintln!("{}", serde_json::json!({ "kind": kind, "error": error }));
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    let matches = Cli::command()
        .after_help(config_keys_help())
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match matches {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            error_record("usage", &e.to_string());
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version print to stdout and exit cleanly
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Usage(message)) => {
            error_record("usage", &message);
            ExitCode::from(1)
        }
        Err(RunError::Runtime(err)) => {
            error_record("runtime", &format!("{err:#}"));
            ExitCode::from(2)
        }
    }
}

enum RunError {
    Usage(String),
    Runtime(anyhow::Error),
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>, RunError> {
    set.iter()
        .map(|pair| {
            pair.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| RunError::Usage(format!("--set `{pair}` is not KEY=VALUE")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), RunError> {
    let mut overrides = parse_overrides(&cli.set)?;
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let cfg = Config::load(cli.config.as_deref(), std::env::vars(), &overrides)
        .map_err(|e| RunError::Usage(format!("{e:#}")))?;

    if cli.print_config {
        print!("{}", cfg.to_file_string());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(RunError::Usage("a subcommand is required (see --help)".into()));
    };

    let result: Result<()> = match command {
        Command::Simulate(a) => {
            commands::simulate(&cfg, &a.repo, a.sessions, &a.out, a.filter_functions)
        }
        Command::Train(a) => commands::train(&cfg, &a.dataset, &a.out, a.metrics.as_deref()),
        Command::Manipulate(a) => commands::manipulate(
            &cfg,
            &commands::ManipulateArgs {
                prompt_file: &a.prompt,
                policy_path: a.policy.as_deref(),
                random: a.random,
                cursor_line: a.cursor_line,
                cursor_col: a.cursor_col,
            },
        ),
        Command::Serve(a) => commands::serve(&cfg, a.listen.as_deref()),
        Command::Metrics(a) => {
            commands::metrics(&cfg, &a.reference, &a.hypothesis, a.out.as_deref())
        }
        Command::Reconstruct(a) => commands::reconstruct_cmd(&cfg, &a.log, &a.out_dir),
        Command::Evaluate(a) => commands::evaluate(
            &cfg,
            &commands::EvaluateArgs {
                with_mitigation: a.with_mitigation,
                without_mitigation: a.without_mitigation,
                policy_path: a.policy.as_deref(),
                sessions: a.sessions,
                out: a.out.as_deref(),
            },
        ),
    };
    result.map_err(RunError::Runtime)
}
