//! Two batch runs written to run directories and compared side by side.
//!
//! cargo run --example experiment_report

use emomas::experiment::{compare, run_experiment, ExperimentConfig, ScenarioSource};
use emomas::negotiation::PolicyKind;
use emomas::scenarios::{Domain, OpponentStrategy};

pub fn run() -> emomas::error::Result<()> {
    let root = tempfile::tempdir()?;
    let mut dirs = Vec::new();
    for policy in [PolicyKind::Vanilla, PolicyKind::EmoMasBayes] {
        let mut cfg = ExperimentConfig::scripted(Domain::Medical, policy, root.path().join(policy.label()));
        cfg.opponent_strategy = OpponentStrategy::Victim;
        cfg.scenarios = ScenarioSource::Generate(10);
        cfg.overrides.insert("orchestrator.eta".into(), 0.2);
        let report = run_experiment(&cfg)?;
        if let Some(b) = report.summary.behavior {
            println!("{policy}: tracking {:.0}% over {} turns", b.tracking.rate_percent, b.turns);
        }
        dirs.push(cfg.out);
    }
    println!("\n{}", compare(&dirs)?);
    Ok(())
}

fn main() -> emomas::error::Result<()> {
    run()
}
