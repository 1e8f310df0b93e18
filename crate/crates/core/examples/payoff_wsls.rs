//! Payoff table and win-stay, lose-shift replies against a fixed client trajectory.
//!
//! cargo run --example payoff_wsls

use emomas::emotion::Emotion;
use emomas::game_theory::{GameTheoryAgent, PayoffMatrix, WslsConfig};

pub fn run() -> emomas::error::Result<()> {
    let m = PayoffMatrix::published();
    println!("payoffs (client, agent) with the client on rows:\n");
    print!("{:>9}", "");
    for a in Emotion::ALL {
        print!("{:>9}", a.label());
    }
    println!();
    for c in Emotion::ALL {
        print!("{:>9}", c.label());
        for a in Emotion::ALL {
            let (pc, pa) = m.lookup(c, a);
            print!("{:>9}", format!("({pc},{pa})"));
        }
        println!();
    }

    let agent = GameTheoryAgent::new(WslsConfig::default());
    let mut state = agent.new_state();
    let client = [Emotion::Anger, Emotion::Anger, Emotion::Fear, Emotion::Joy, Emotion::Neutral, Emotion::Sadness];
    println!("\nround  client    lost?  reply     confidence");
    for (r, c) in client.into_iter().enumerate() {
        let lost = agent.lost_last_round(&state);
        let rec = agent.select(c, &mut state);
        println!(
            "{:>5}  {:<8}  {:<5}  {:<8}  {:.3}",
            r + 1,
            c.label(),
            lost,
            rec.pick.label(),
            rec.confidence.prob(rec.pick)
        );
    }
    Ok(())
}

fn main() -> emomas::error::Result<()> {
    run()
}
