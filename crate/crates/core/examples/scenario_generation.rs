//! Synthetic scenarios for every domain, written to JSONL and read back.
//!
//! cargo run --example scenario_generation

use emomas::scenarios::{generate_synthetic, load_scenarios, Domain};

pub fn run() -> emomas::error::Result<()> {
    let dir = tempfile::tempdir()?;
    for domain in Domain::ALL {
        let set = generate_synthetic(domain, 3, 2024)?;
        let path = dir.path().join(format!("{domain}.jsonl"));
        std::fs::write(&path, set.to_jsonl())?;
        let back = load_scenarios(&path, domain)?;
        assert_eq!(back.scenarios, set.scenarios);

        println!("{domain}: {} ({} vs {})", domain.unit(), domain.negotiator_role(), domain.opponent_role());
        for s in &set.scenarios {
            println!(
                "  {:<12} target {:>7.1}  opponent {:>7.1}  stake {:>9.1}  opens {}",
                s.case_id,
                s.negotiator_target,
                s.opponent_target,
                s.stake,
                s.opponent_emotion.map_or("-", |e| e.label())
            );
        }
    }
    Ok(())
}

fn main() -> emomas::error::Result<()> {
    run()
}
