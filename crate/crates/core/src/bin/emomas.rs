use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use emomas::error::Error;
use emomas::experiment::{
    compare, parse_override, run_experiment, ExperimentConfig, Hyperparameters, JudgeKind, ScenarioSource,
};
use emomas::llm::{BackendConfig, BackendKind};
use emomas::negotiation::{PolicyKind, DEFAULT_MAX_ROUNDS};
use emomas::scenarios::{Domain, OpponentStrategy};

#[derive(Parser)]
#[command(name = "emomas", version, about = "Emotion-selection experiments for automated negotiation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of negotiations and write a run directory.
    Run(Box<RunArgs>),
    /// Compare two or more run directories of the same domain.
    Compare {
        #[arg(required = true, num_args = 1..)]
        dirs: Vec<PathBuf>,
    },
    /// List every hyperparameter with its default and valid range.
    Hyperparameters,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Scripted,
    Remote,
}

#[derive(Args)]
struct RunArgs {
    /// debt, medical, emergency or education.
    #[arg(long)]
    domain: String,
    /// vanilla, vanilla+prompt, game_theory, q_learning, coherence, emomas_llm or emomas_bayes.
    #[arg(long, default_value = "emomas_bayes")]
    negotiator: String,
    /// vanilla, pressuring, victim or threatening.
    #[arg(long, default_value = "vanilla")]
    opponent_strategy: String,
    /// Backend for every role unless overridden per role.
    #[arg(long, value_enum, default_value = "scripted")]
    backend: Backend,
    #[arg(long, value_enum)]
    opponent_backend: Option<Backend>,
    #[arg(long, value_enum)]
    judge_backend: Option<Backend>,
    /// marker, gap or llm; chosen from the backends when omitted.
    #[arg(long)]
    judge: Option<String>,
    /// JSONL scenario file.
    #[arg(long, conflicts_with = "generate")]
    scenarios_file: Option<PathBuf>,
    /// Generate N synthetic scenarios.
    #[arg(long, value_name = "N")]
    generate: Option<usize>,
    /// Use at most N scenarios from the file.
    #[arg(long, value_name = "N", requires = "scenarios_file")]
    limit: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
    max_rounds: u32,
    #[arg(long)]
    out: PathBuf,
    /// Hyperparameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Start the Q-table from a previous run's qtable.txt.
    #[arg(long)]
    resume_qtable: Option<PathBuf>,
    /// Skip the per-turn behavior evaluation.
    #[arg(long)]
    no_behavior: bool,
    /// Worker threads; only used by policies without learning state.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// OpenAI-compatible chat completions URL.
    #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
    endpoint: String,
    #[arg(long, default_value = "gpt-4o-mini")]
    model: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
}

fn backend_config(kind: Backend, a: &RunArgs) -> BackendConfig {
    match kind {
        Backend::Scripted => BackendConfig::scripted(),
        Backend::Remote => BackendConfig {
            kind: BackendKind::Remote,
            api_key_env: a.api_key_env.clone(),
            timeout_secs: a.timeout,
            retries: a.retries,
            ..BackendConfig::remote(a.endpoint.clone(), a.model.clone())
        },
    }
}

fn config(a: &RunArgs) -> Result<ExperimentConfig, Error> {
    let scenarios = match (&a.scenarios_file, a.generate) {
        (Some(p), None) => ScenarioSource::File(p.clone()),
        (None, Some(n)) => ScenarioSource::Generate(n),
        (None, None) => ScenarioSource::Generate(20),
        (Some(_), Some(_)) => unreachable!("clap rejects both"),
    };
    let mut overrides = BTreeMap::new();
    for s in &a.overrides {
        let (k, v) = parse_override(s)?;
        overrides.insert(k, v);
    }
    Ok(ExperimentConfig {
        domain: a.domain.parse::<Domain>()?,
        negotiator: a.negotiator.parse::<PolicyKind>()?,
        opponent_strategy: a.opponent_strategy.parse::<OpponentStrategy>()?,
        negotiator_backend: backend_config(a.backend, a),
        opponent_backend: backend_config(a.opponent_backend.unwrap_or(a.backend), a),
        judge_backend: backend_config(a.judge_backend.unwrap_or(a.backend), a),
        judge: a.judge.as_deref().map(str::parse::<JudgeKind>).transpose()?,
        scenarios,
        limit: a.limit,
        seed: a.seed,
        max_rounds: a.max_rounds,
        overrides,
        resume_qtable: a.resume_qtable.clone(),
        evaluate_behavior: !a.no_behavior,
        jobs: a.jobs,
        out: a.out.clone(),
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BackendUnavailable { .. } | Error::BackendRejected { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run(a) => {
            let cfg = config(&a)?;
            let report = run_experiment(&cfg)?;
            print!("{}", std::fs::read_to_string(cfg.out.join("summary.txt"))?);
            println!("wrote {}", cfg.out.display());
            if let Some(reason) = report.summary.aborted {
                eprintln!("error: run aborted by a backend failure: {reason}");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Compare { dirs } => print!("{}", compare(&dirs)?),
        Command::Hyperparameters => print!("{}", Hyperparameters::default().describe()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
