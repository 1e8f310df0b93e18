//! Reliability-weighted fusion of three expert recommendations, with the
//! weights learning which expert tends to be followed and rewarded.
//!
//! cargo run --example bayes_fusion

use emomas::emotion::{Emotion, EmotionDistribution};
use emomas::orchestrator::{agent_accuracy, fuse, AgentId, AgentRecommendation, ReliabilityConfig, ReliabilityWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rec(agent: AgentId, pick: Emotion) -> AgentRecommendation {
    let mut w = [0.01; 7];
    w[pick.index()] = 0.94;
    AgentRecommendation::new(agent, EmotionDistribution::from_weights(w).unwrap(), pick)
}

pub fn run() -> emomas::error::Result<()> {
    let recs = [
        rec(AgentId::GameTheory, Emotion::Joy),
        rec(AgentId::QLearning, Emotion::Fear),
        rec(AgentId::Coherence, Emotion::Joy),
    ];
    let f = fuse(&recs, &[0.2, 0.6, 0.2])?;
    println!("union {:?}, selected {}", f.union.iter().map(|e| e.label()).collect::<Vec<_>>(), f.selected);

    // The coherence expert agrees with the best emotion 90% of the time, the others a third.
    let mut w = ReliabilityWeights::new(ReliabilityConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for negotiation in 1..=30 {
        let mut turns = Vec::new();
        for _ in 0..10 {
            let best = Emotion::ALL[rng.random_range(0..7)];
            let other = |rng: &mut ChaCha8Rng, hit: f64| {
                if rng.random::<f64>() < hit { best } else { Emotion::ALL[rng.random_range(0..7)] }
            };
            let recs = vec![
                rec(AgentId::GameTheory, other(&mut rng, 0.33)),
                rec(AgentId::QLearning, other(&mut rng, 0.33)),
                rec(AgentId::Coherence, other(&mut rng, 0.9)),
            ];
            w.micro_update(&recs, best)?;
            turns.push((recs, best));
        }
        w.macro_update(true, Some(0.2), agent_accuracy(&turns))?;
        if negotiation % 5 == 0 {
            let [g, q, c] = w.weights();
            println!("after {negotiation:>2} negotiations: gt {g:.3}  rl {q:.3}  coherence {c:.3}");
        }
    }
    Ok(())
}

fn main() -> emomas::error::Result<()> {
    run()
}
