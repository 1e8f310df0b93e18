//! Tabular Q-learning on a two-state bandit, then a save and reload of the table.
//!
//! cargo run --example q_learning_bandit

use emomas::emotion::Emotion;
use emomas::rl::{QParams, QTable, RlState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> emomas::error::Result<()> {
    // With no discount every update is a one-step bandit update.
    let params = QParams { discount: 0.0, ..QParams::default() };
    let mut q = QTable::new(params, 7)?;
    let states = [
        RlState::from_parts(Emotion::Neutral, Emotion::Anger, 1, 1.0)?,
        RlState::from_parts(Emotion::Joy, Emotion::Sadness, 9, 0.1)?,
    ];
    let best = [Emotion::Fear, Emotion::Joy];
    let reward = |s: usize, a: Emotion| if a == best[s] { 1.0 } else { 0.2 };

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for step in 0..500 {
        let s = step % 2;
        let a = q.select_with(states[s], &mut rng).pick;
        q.update(states[s], a, reward(s, a), states[s])?;
    }
    for (s, state) in states.iter().enumerate() {
        let d = q.distribution(*state);
        println!("{state}: P({}) = {:.4}", best[s].label(), d.prob(best[s]));
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("qtable.txt");
    q.save(&path)?;
    let back = QTable::load(&path)?;
    assert_eq!(back, q);
    println!("saved and reloaded {} bytes", std::fs::metadata(&path)?.len());
    Ok(())
}

fn main() -> emomas::error::Result<()> {
    run()
}
