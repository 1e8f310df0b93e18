//! One debt negotiation against an OpenAI-compatible endpoint.
//!
//! Needs EMOMAS_LIVE_ENDPOINT, EMOMAS_LIVE_MODEL and the key in
//! OPENAI_API_KEY (or the variable named by EMOMAS_LIVE_KEY_ENV):
//!
//! EMOMAS_LIVE_ENDPOINT=https://api.openai.com/v1/chat/completions \
//! EMOMAS_LIVE_MODEL=gpt-4o-mini cargo run --example live_negotiation

use emomas::experiment::{run_experiment, ExperimentConfig, ScenarioSource};
use emomas::llm::BackendConfig;
use emomas::negotiation::PolicyKind;
use emomas::scenarios::Domain;

fn main() -> emomas::error::Result<()> {
    env_logger::init();
    let (Ok(endpoint), Ok(model)) = (std::env::var("EMOMAS_LIVE_ENDPOINT"), std::env::var("EMOMAS_LIVE_MODEL")) else {
        println!("set EMOMAS_LIVE_ENDPOINT and EMOMAS_LIVE_MODEL to run against a live model");
        return Ok(());
    };
    let mut backend = BackendConfig::remote(endpoint, model);
    if let Ok(var) = std::env::var("EMOMAS_LIVE_KEY_ENV") {
        backend.api_key_env = var;
    }
    let out = std::env::temp_dir().join("emomas-live");
    let mut cfg = ExperimentConfig::scripted(Domain::Debt, PolicyKind::EmoMasBayes, &out);
    cfg.negotiator_backend = backend.clone();
    cfg.opponent_backend = backend.clone();
    cfg.judge_backend = backend;
    cfg.scenarios = ScenarioSource::Generate(1);
    cfg.max_rounds = 10;
    let report = run_experiment(&cfg)?;
    for turn in &report.transcripts[0].turns {
        println!("{:>2} {}: {}", turn.round, turn.party, turn.text);
    }
    println!("\n{}", std::fs::read_to_string(out.join("summary.txt"))?);
    Ok(())
}
