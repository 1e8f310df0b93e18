//! Coherence scoring across phases, first from the built-in tables and then
//! from an assessment reply in the text format a chat model is asked for.
//!
//! cargo run --example coherence_assessment

use emomas::coherence::{coherence_select, CoherenceConfig, FallbackAssessor, LlmAssessor};
use emomas::context::NegotiationContext;
use emomas::emotion::{Emotion, Party};
use emomas::llm::{Caller, ChatBackend, ChatRequest, ScriptedBackend};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A scripted backend that reports itself as a real model, so the
/// assessor sends it the prompt instead of using the tables.
struct Pretend(ScriptedBackend);

impl ChatBackend for Pretend {
    fn chat(&self, r: &ChatRequest<'_>) -> emomas::error::Result<String> {
        self.0.chat(r)
    }
}

fn show(label: &str, rec: &emomas::orchestrator::AgentRecommendation) {
    let probs: Vec<String> = Emotion::ALL.iter().map(|e| format!("{}={:.3}", e.label(), rec.confidence.prob(*e))).collect();
    println!("{label:<28} pick {:<8} {}", rec.pick.label(), probs.join(" "));
}

pub fn run() -> emomas::error::Result<()> {
    let cfg = CoherenceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tables = FallbackAssessor::default();
    for (round, gap) in [(1, 1.0), (5, 0.8), (10, 0.3), (20, 0.05)] {
        let mut ctx = NegotiationContext::synthetic(Emotion::Neutral, Emotion::Anger, round, gap);
        for _ in 0..3 {
            ctx.history.push(Party::Negotiator, Emotion::Neutral);
        }
        let rec = coherence_select(&ctx, &cfg, &tables, &mut rng)?;
        show(&format!("{} (gap {gap})", ctx.phase.label()), &rec);
    }

    let reply = "\
joy: 0.2: 0.3: 0.4: 0.5: too cheerful after an outburst
sadness: 0.6: 0.5: 0.3: 0.6: acknowledges the hardship
anger: 0.3: 0.2: 0.2: 0.2: escalates
fear: 0.4: 0.4: 0.5: 0.5: signals shared stakes
surprise: 0.5: 0.4: 0.3: 0.4: buys time
disgust: 0.1: 0.1: 0.1: 0.1: insulting
neutral: 0.9: 0.8: 0.6: 0.7: calm and factual";
    let model = Pretend(ScriptedBackend::new().with_rule(Caller::Assessor, 2, reply));
    let ctx = NegotiationContext::synthetic(Emotion::Neutral, Emotion::Anger, 2, 0.9);
    let rec = coherence_select(&ctx, &cfg, &LlmAssessor::new(&model), &mut rng)?;
    show("model assessment", &rec);
    Ok(())
}

fn main() -> emomas::error::Result<()> {
    run()
}
