//! One offline negotiation: the reliability-weighted orchestrator against a
//! threatening scripted opponent, printed turn by turn.
//!
//! cargo run --example scripted_negotiation

use emomas::coherence::CoherenceConfig;
use emomas::game_theory::GameTheoryAgent;
use emomas::llm::ScriptedBackend;
use emomas::negotiation::{
    run_negotiation, Experts, Fuser, MarkerJudge, OrchestratedPolicy, Participants, ScriptedNegotiator,
    ScriptedOpponent,
};
use emomas::orchestrator::ReliabilityWeights;
use emomas::rl::{QLearningAgent, QParams, QTable};
use emomas::scenarios::{generate_synthetic, Domain, OpponentStrategy};

pub fn run() -> emomas::error::Result<()> {
    let scenario = generate_synthetic(Domain::Debt, 1, 8)?.scenarios.remove(0);
    println!("{}: {}\n", scenario.case_id, scenario.describe());

    let experts = Experts::new(
        GameTheoryAgent::default(),
        QLearningAgent::new(QTable::new(QParams::default(), 1)?),
        CoherenceConfig::default(),
        None,
    );
    let mut policy = OrchestratedPolicy::new(experts, ReliabilityWeights::default(), Fuser::Bayes);
    let mut negotiator = ScriptedNegotiator::default();
    let mut opponent = ScriptedOpponent::new(OpponentStrategy::Threatening);
    let perception = ScriptedBackend::new();
    let mut p = Participants {
        negotiator: &mut policy,
        negotiator_voice: &mut negotiator,
        opponent_voice: &mut opponent,
        judge: &MarkerJudge,
        perception: &perception,
    };
    let t = run_negotiation(&scenario, &mut p, 30, 8)?;

    for turn in &t.turns {
        let picks: Vec<String> = turn.recommendations.iter().map(|r| format!("{}:{}", r.agent, r.pick)).collect();
        println!("{:>2} {:<10} {}", turn.round, turn.party.to_string(), turn.text);
        if !picks.is_empty() {
            println!("   experts {}", picks.join(" "));
        }
    }
    let s = &t.summary;
    println!("\n{} after {} rounds, agreed {:?}, outcome {:?}", s.status, s.rounds, s.agreed, s.outcome);
    println!("weights now {:?}", policy.weights.weights());
    Ok(())
}

fn main() -> emomas::error::Result<()> {
    run()
}
