//! Online tabular Q-learning over a compact negotiation state.
//!
//! The state is the pair of current emotions, a four-step phase and a
//! two-step gap category: 7 x 7 x 4 x 2 = 392 states, 7 actions each.
//! Rewards arrive only at the end of a negotiation; intermediate turns learn
//! through bootstrapping.

use std::fmt::{self, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::context::{NegotiationContext, Status};
use crate::emotion::{softmax, Emotion, EmotionDistribution, Scores, N_EMOTIONS};
use crate::error::{Error, Result};
use crate::orchestrator::{AgentId, AgentRecommendation, ExplorationSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RlPhase {
    Early,
    Middle,
    Late,
    Crisis,
}

impl RlPhase {
    pub const ALL: [RlPhase; 4] = [RlPhase::Early, RlPhase::Middle, RlPhase::Late, RlPhase::Crisis];

    /// Same round boundaries as the coherence phases.
    pub fn from_round(round: u32) -> RlPhase {
        match round {
            0..=3 => RlPhase::Early,
            4..=7 => RlPhase::Middle,
            8..=12 => RlPhase::Late,
            _ => RlPhase::Crisis,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapCategory {
    Small,
    Large,
}

/// Relative gaps strictly above this are `Large`.
pub const LARGE_GAP: f64 = 0.25;

impl GapCategory {
    pub fn from_gap(gap: f64) -> GapCategory {
        if gap > LARGE_GAP {
            GapCategory::Large
        } else {
            GapCategory::Small
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RlState {
    pub negotiator: Emotion,
    pub opponent: Emotion,
    pub phase: RlPhase,
    pub gap: GapCategory,
}

impl RlState {
    pub const COUNT: usize = N_EMOTIONS * N_EMOTIONS * 4 * 2;

    /// Builds a state from raw values; negative rounds are rejected.
    pub fn from_parts(negotiator: Emotion, opponent: Emotion, round: i64, gap: f64) -> Result<RlState> {
        if round < 0 {
            return Err(Error::InvalidInput(format!("round must be non-negative, got {round}")));
        }
        if !(gap >= 0.0) {
            return Err(Error::InvalidInput(format!("gap must be non-negative, got {gap}")));
        }
        let round = u32::try_from(round).unwrap_or(u32::MAX);
        Ok(RlState {
            negotiator,
            opponent,
            phase: RlPhase::from_round(round),
            gap: GapCategory::from_gap(gap),
        })
    }

    pub fn index(self) -> usize {
        ((self.negotiator.index() * N_EMOTIONS + self.opponent.index()) * 4 + self.phase as usize) * 2 + self.gap as usize
    }

    pub fn from_index(i: usize) -> Option<RlState> {
        if i >= Self::COUNT {
            return None;
        }
        Some(RlState {
            gap: [GapCategory::Small, GapCategory::Large][i % 2],
            phase: RlPhase::ALL[(i / 2) % 4],
            opponent: Emotion::ALL[(i / 8) % N_EMOTIONS],
            negotiator: Emotion::ALL[i / 56],
        })
    }
}

pub fn encode_state(ctx: &NegotiationContext) -> RlState {
    RlState {
        negotiator: ctx.negotiator_emotion,
        opponent: ctx.opponent_emotion,
        phase: RlPhase::from_round(ctx.round),
        gap: GapCategory::from_gap(ctx.gap),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub temperature: f64,
    /// Standard deviation of the initial values.
    pub init_std: f64,
    /// Listed with the agent's settings; the table does not use features.
    pub feature_dim: usize,
}

impl Default for QParams {
    fn default() -> Self {
        QParams {
            learning_rate: 0.1,
            discount: 0.9,
            temperature: 0.1,
            init_std: 0.01,
            feature_dim: 10,
        }
    }
}

impl QParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::param("learning_rate", "must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::param("discount", "must be in [0, 1]"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::param("temperature", "must be positive"));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::param("init_std", "must be non-negative"));
        }
        Ok(())
    }
}

/// Q-values for every (state, action) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
    pub params: QParams,
}

pub const QTABLE_HEADER: &str = "emomas-qtable v1";

impl QTable {
    /// Values drawn from `N(0, init_std)` with a seeded generator.
    pub fn new(params: QParams, seed: u64) -> Result<QTable> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = if params.init_std > 0.0 {
            let normal = Normal::new(0.0, params.init_std).map_err(|e| Error::param("init_std", e.to_string()))?;
            (0..RlState::COUNT * N_EMOTIONS).map(|_| normal.sample(&mut rng)).collect()
        } else {
            vec![0.0; RlState::COUNT * N_EMOTIONS]
        };
        Ok(QTable { values, params })
    }

    pub fn zeros(params: QParams) -> Result<QTable> {
        params.validate()?;
        Ok(QTable {
            values: vec![0.0; RlState::COUNT * N_EMOTIONS],
            params,
        })
    }

    pub fn get(&self, s: RlState, a: Emotion) -> f64 {
        self.values[s.index() * N_EMOTIONS + a.index()]
    }

    pub fn set(&mut self, s: RlState, a: Emotion, v: f64) -> Result<()> {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("Q-value must be finite, got {v}")));
        }
        self.values[s.index() * N_EMOTIONS + a.index()] = v;
        Ok(())
    }

    pub fn row(&self, s: RlState) -> Scores {
        let start = s.index() * N_EMOTIONS;
        let mut row = [0.0; N_EMOTIONS];
        row.copy_from_slice(&self.values[start..start + N_EMOTIONS]);
        row
    }

    pub fn max_value(&self, s: RlState) -> f64 {
        self.row(s).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// One Q-learning step toward `reward + discount * max Q(s_next, .)`.
    /// Returns the change applied to `Q(s, a)`.
    pub fn update(&mut self, s: RlState, a: Emotion, reward: f64, s_next: RlState) -> Result<f64> {
        let target = reward + self.params.discount * self.max_value(s_next);
        self.step_toward(s, a, reward, target)
    }

    /// Update for the final action of an episode: no successor value.
    pub fn update_terminal(&mut self, s: RlState, a: Emotion, reward: f64) -> Result<f64> {
        self.step_toward(s, a, reward, reward)
    }

    fn step_toward(&mut self, s: RlState, a: Emotion, reward: f64, target: f64) -> Result<f64> {
        if !reward.is_finite() {
            return Err(Error::InvalidInput(format!("reward must be finite, got {reward}")));
        }
        let q = self.get(s, a);
        let delta = self.params.learning_rate * (target - q);
        self.set(s, a, q + delta)?;
        Ok(delta)
    }

    pub fn distribution(&self, s: RlState) -> EmotionDistribution {
        softmax(&self.row(s), self.params.temperature).expect("validated temperature and finite values")
    }

    /// Softmax recommendation with the pick sampled from `rng`.
    pub fn select_with<R: Rng + ?Sized>(&self, s: RlState, rng: &mut R) -> AgentRecommendation {
        let dist = self.distribution(s);
        let pick = dist.sample(rng);
        AgentRecommendation::new(AgentId::QLearning, dist, pick)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        writeln!(out, "{QTABLE_HEADER}").unwrap();
        writeln!(
            out,
            "learning_rate={} discount={} temperature={} init_std={} states={} actions={}",
            p.learning_rate,
            p.discount,
            p.temperature,
            p.init_std,
            RlState::COUNT,
            N_EMOTIONS
        )
        .unwrap();
        for s in 0..RlState::COUNT {
            for a in 0..N_EMOTIONS {
                writeln!(out, "{s} {a} {}", self.values[s * N_EMOTIONS + a]).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<QTable> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == QTABLE_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    reason: format!("expected header '{QTABLE_HEADER}'"),
                })
            }
        }
        let (_, param_line) = lines.next().ok_or(Error::Parse {
            line: 2,
            reason: "missing parameter line".into(),
        })?;
        let mut params = QParams::default();
        for kv in param_line.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse {
                line: 2,
                reason: format!("expected key=value, got '{kv}'"),
            })?;
            let bad = |_| Error::Parse {
                line: 2,
                reason: format!("bad value for {k}: '{v}'"),
            };
            match k {
                "learning_rate" => params.learning_rate = v.parse().map_err(bad)?,
                "discount" => params.discount = v.parse().map_err(bad)?,
                "temperature" => params.temperature = v.parse().map_err(bad)?,
                "init_std" => params.init_std = v.parse().map_err(bad)?,
                "states" | "actions" => {
                    let expected = if k == "states" { RlState::COUNT } else { N_EMOTIONS };
                    if v.parse::<usize>().ok() != Some(expected) {
                        return Err(Error::Parse {
                            line: 2,
                            reason: format!("{k}={v} does not match this build ({expected})"),
                        });
                    }
                }
                _ => {}
            }
        }
        params.validate()?;

        let mut values = vec![f64::NAN; RlState::COUNT * N_EMOTIONS];
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::Parse { line: i + 1, reason };
            let mut parts = line.split_whitespace();
            let (Some(s), Some(a), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(err(format!("expected 'state action value', got '{line}'")));
            };
            let s: usize = s.parse().map_err(|_| err(format!("bad state index '{s}'")))?;
            let a: usize = a.parse().map_err(|_| err(format!("bad action index '{a}'")))?;
            let v: f64 = v.parse().map_err(|_| err(format!("bad value '{v}'")))?;
            if s >= RlState::COUNT || a >= N_EMOTIONS {
                return Err(err(format!("index ({s}, {a}) out of range")));
            }
            if !v.is_finite() {
                return Err(err(format!("value must be finite, got {v}")));
            }
            let slot = &mut values[s * N_EMOTIONS + a];
            if !slot.is_nan() {
                return Err(err(format!("duplicate entry ({s}, {a})")));
            }
            *slot = v;
        }
        if let Some(missing) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Parse {
                line: 0,
                reason: format!("missing entry ({}, {})", missing / N_EMOTIONS, missing % N_EMOTIONS),
            });
        }
        Ok(QTable { values, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<QTable> {
        QTable::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Seeded selection: same table, state and seed give the same recommendation.
pub fn rl_select(q: &QTable, s: RlState, seed: u64) -> AgentRecommendation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    q.select_with(s, &mut rng)
}

/// Terminal reward for a finished negotiation.
///
/// `+10` for success, `-5` for failure or timeout, `+10 * max(outcome, 0)`
/// and `-0.1` per round used.
pub fn compute_reward(status: Status, rounds_used: u32, outcome: Option<f64>) -> f64 {
    let base = match status {
        Status::Success => 10.0,
        Status::Failure | Status::Timeout => -5.0,
    };
    base + 10.0 * outcome.unwrap_or(0.0).max(0.0) - 0.1 * rounds_used as f64
}

/// The Q-learning selector plus its per-negotiation trace.
#[derive(Clone, Debug)]
pub struct QLearningAgent {
    pub table: QTable,
    /// Epsilon-greedy exploration on top of softmax sampling; off when `None`.
    pub exploration: Option<ExplorationSchedule>,
    last: Option<(RlState, Emotion)>,
}

impl QLearningAgent {
    pub fn new(table: QTable) -> Self {
        QLearningAgent {
            table,
            exploration: None,
            last: None,
        }
    }

    pub fn begin(&mut self) {
        self.last = None;
    }

    pub fn recommend<R: Rng + ?Sized>(&self, ctx: &NegotiationContext, rng: &mut R) -> AgentRecommendation {
        let s = encode_state(ctx);
        let mut rec = self.table.select_with(s, rng);
        if let Some(schedule) = &self.exploration {
            let eps = schedule.rate(ctx.round);
            if rng.random::<f64>() < eps {
                let e = Emotion::ALL[rng.random_range(0..N_EMOTIONS)];
                rec = AgentRecommendation::new(AgentId::QLearning, rec.confidence, e);
            }
        }
        rec
    }

    /// Records the emotion actually used in state `ctx`; bootstraps the previous
    /// step toward this one with zero reward.
    pub fn observe(&mut self, ctx: &NegotiationContext, used: Emotion) -> Result<()> {
        let s = encode_state(ctx);
        if let Some((ps, pa)) = self.last {
            self.table.update(ps, pa, 0.0, s)?;
        }
        self.last = Some((s, used));
        Ok(())
    }

    pub fn finish(&mut self, reward: f64) -> Result<()> {
        if let Some((s, a)) = self.last.take() {
            self.table.update_terminal(s, a, reward)?;
        }
        Ok(())
    }
}

impl fmt::Display for RlState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {:?}, {:?})", self.negotiator, self.opponent, self.phase, self.gap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Emotion::*;

    fn st(i: usize) -> RlState {
        RlState::from_index(i).unwrap()
    }

    #[test]
    fn encoding_examples() {
        let s = RlState::from_parts(Neutral, Anger, 2, 0.5).unwrap();
        assert_eq!((s.negotiator, s.opponent, s.phase, s.gap), (Neutral, Anger, RlPhase::Early, GapCategory::Large));
        let s = RlState::from_parts(Joy, Joy, 13, 0.0).unwrap();
        assert_eq!((s.phase, s.gap), (RlPhase::Crisis, GapCategory::Small));
        assert_eq!(GapCategory::from_gap(0.25), GapCategory::Small);
        assert!(RlState::from_parts(Joy, Joy, -1, 0.0).is_err());
        assert_eq!(RlState::COUNT, 392);
    }

    #[test]
    fn encoding_is_a_bijection() {
        let mut seen = vec![false; RlState::COUNT];
        for n in Emotion::ALL {
            for o in Emotion::ALL {
                for p in RlPhase::ALL {
                    for g in [GapCategory::Small, GapCategory::Large] {
                        let s = RlState { negotiator: n, opponent: o, phase: p, gap: g };
                        assert!(!std::mem::replace(&mut seen[s.index()], true));
                        assert_eq!(RlState::from_index(s.index()), Some(s));
                    }
                }
            }
        }
        assert!(seen.into_iter().all(|x| x));
        assert_eq!(RlState::from_index(392), None);
    }

    #[test]
    fn update_arithmetic() {
        let mut q = QTable::zeros(QParams::default()).unwrap();
        let (s, n) = (st(0), st(1));
        q.update(s, Joy, 10.0, n).unwrap();
        assert_eq!(q.get(s, Joy), 1.0);

        let mut q = QTable::zeros(QParams::default()).unwrap();
        q.set(s, Joy, 1.0).unwrap();
        q.set(n, Fear, 1.0).unwrap();
        q.update(s, Joy, 0.0, n).unwrap();
        assert!((q.get(s, Joy) - 0.99).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_with_zero_discount() {
        let params = QParams { discount: 0.0, ..QParams::default() };
        let mut q = QTable::zeros(params).unwrap();
        let s = st(5);
        let mut steps = 0;
        while (q.get(s, Anger) - 1.0).abs() >= 1e-6 {
            q.update(s, Anger, 1.0, s).unwrap();
            steps += 1;
        }
        assert!(steps <= 200, "{steps}");
    }

    #[test]
    fn untrained_rows_are_near_uniform() {
        let q = QTable::new(QParams::default(), 42).unwrap();
        for i in 0..RlState::COUNT {
            for p in q.distribution(st(i)).as_array() {
                assert!((0.05..=0.35).contains(p), "{p}");
            }
        }
    }

    #[test]
    fn dominant_value_wins() {
        let mut q = QTable::zeros(QParams::default()).unwrap();
        let s = st(3);
        q.set(s, Joy, 5.0).unwrap();
        assert!(q.distribution(s).prob(Joy) > 1.0 - 1e-9);
    }

    #[test]
    fn tied_maxima_split_evenly() {
        let mut q = QTable::zeros(QParams::default()).unwrap();
        let s = st(9);
        for e in Emotion::ALL {
            q.set(s, e, -1e6).unwrap();
        }
        q.set(s, Fear, 0.0).unwrap();
        q.set(s, Disgust, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let fear = (0..n).filter(|_| q.select_with(s, &mut rng).pick == Fear).count();
        let share = fear as f64 / n as f64;
        assert!((share - 0.5).abs() < 0.05, "{share}");
    }

    #[test]
    fn rewards() {
        assert!((compute_reward(Status::Success, 10, Some(0.5)) - 14.0).abs() < 1e-12);
        assert!((compute_reward(Status::Failure, 20, None) - -7.0).abs() < 1e-12);
        assert_eq!(compute_reward(Status::Success, 0, Some(0.0)), 10.0);
        assert!((compute_reward(Status::Timeout, 30, None) - -8.0).abs() < 1e-12);
        assert!((compute_reward(Status::Success, 5, Some(-0.4)) - 9.5).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip_preserves_selection() {
        let mut q = QTable::new(QParams::default(), 1).unwrap();
        q.update(st(4), Surprise, 3.25, st(8)).unwrap();
        let back = QTable::from_text(&q.to_text()).unwrap();
        assert_eq!(q, back);
        for i in [0, 4, 100, 391] {
            assert_eq!(rl_select(&q, st(i), 11), rl_select(&back, st(i), 11));
        }
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(QTable::from_text("nope\n").is_err());
        let mut text = QTable::zeros(QParams::default()).unwrap().to_text();
        text.push_str("0 0 1.0\n");
        assert!(QTable::from_text(&text).is_err(), "duplicate");
        let partial: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(QTable::from_text(&partial).is_err(), "missing");
    }

    #[test]
    fn agent_bootstraps_then_terminates() {
        let mut agent = QLearningAgent::new(QTable::zeros(QParams::default()).unwrap());
        agent.begin();
        let c1 = NegotiationContext::synthetic(Neutral, Anger, 1, 1.0);
        let c2 = NegotiationContext::synthetic(Joy, Anger, 2, 1.0);
        agent.observe(&c1, Joy).unwrap();
        agent.observe(&c2, Fear).unwrap();
        agent.finish(10.0).unwrap();
        assert_eq!(agent.table.get(encode_state(&c2), Fear), 1.0);
        assert_eq!(agent.table.get(encode_state(&c1), Joy), 0.0);
    }

    proptest! {
        #[test]
        fn update_touches_one_entry(s in 0usize..392, n in 0usize..392, a in 0usize..7, r in -20.0f64..20.0, seed in any::<u64>()) {
            let mut q = QTable::new(QParams::default(), seed).unwrap();
            let before = q.clone();
            let (s, n, a) = (st(s), st(n), Emotion::ALL[a]);
            let td = r + 0.9 * before.max_value(n) - before.get(s, a);
            let delta = q.update(s, a, r, n).unwrap();
            prop_assert!((delta - 0.1 * td).abs() < 1e-12);
            prop_assert!((q.get(s, a) - before.get(s, a) - 0.1 * td).abs() < 1e-12);
            let changed = q.values.iter().zip(&before.values).filter(|(x, y)| x != y).count();
            prop_assert!(changed <= 1);
        }

        #[test]
        fn selection_is_seed_reproducible(s in 0usize..392, seed in any::<u64>()) {
            let q = QTable::new(QParams::default(), 3).unwrap();
            prop_assert_eq!(rl_select(&q, st(s), seed), rl_select(&q, st(s), seed));
        }
    }
}
