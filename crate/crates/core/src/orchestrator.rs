//! Reliability-weighted fusion of the three expert selectors.
//!
//! Each expert reports a confidence distribution over emotions plus its own
//! pick. The orchestrator scores every emotion in the union of the experts'
//! recommended sets as `sum_i w_i * confidence_i(e)` and returns the best one.
//! It never picks an emotion no expert recommended.
//!
//! Weights move on two time scales:
//!
//! - **micro**: after every turn, each expert's weight is multiplied by
//!   `1 + eta * confidence_i(selected)` and the vector renormalized.
//! - **macro**: after a finished negotiation, successful outcomes add
//!   `kappa * rho * accuracy_i` to each weight, where `rho` is the clipped
//!   outcome metric and `accuracy_i` the share of turns on which expert `i`
//!   picked the selected emotion. The result is then smoothed toward the
//!   Dirichlet prior mean, treating the current weights as evidence worth one
//!   pseudo-count per observed turn.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::context::NegotiationContext;
use crate::emotion::{last_label_in, Emotion, EmotionDistribution, Scores, N_EMOTIONS};
use crate::error::{Error, Result};
use crate::llm::{Caller, ChatBackend, ChatMessage, ChatRequest};
use crate::prompts;

/// Confidence at or above which an emotion counts as recommended.
pub const RECOMMEND_FLOOR: f64 = 0.1 / N_EMOTIONS as f64;

/// Lower bound kept on every reliability weight.
pub const WEIGHT_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentId {
    #[serde(rename = "gt")]
    GameTheory,
    #[serde(rename = "rl")]
    QLearning,
    #[serde(rename = "coherence")]
    Coherence,
}

impl AgentId {
    pub const ALL: [AgentId; 3] = [AgentId::GameTheory, AgentId::QLearning, AgentId::Coherence];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            AgentId::GameTheory => "gt",
            AgentId::QLearning => "rl",
            AgentId::Coherence => "coherence",
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecommendation {
    pub agent: AgentId,
    pub confidence: EmotionDistribution,
    pub pick: Emotion,
    /// Canonically ordered; always contains `pick`.
    pub recommended: Vec<Emotion>,
}

impl AgentRecommendation {
    pub fn new(agent: AgentId, confidence: EmotionDistribution, pick: Emotion) -> Self {
        let recommended = Emotion::ALL
            .into_iter()
            .filter(|e| *e == pick || confidence.prob(*e) >= RECOMMEND_FLOOR)
            .collect();
        AgentRecommendation {
            agent,
            confidence,
            pick,
            recommended,
        }
    }
}

/// Result of a fusion step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fusion {
    pub selected: Emotion,
    /// Weighted score for every emotion, whether or not it is in the union.
    pub scores: Scores,
    pub union: Vec<Emotion>,
}

impl Fusion {
    pub fn selected_score(&self) -> f64 {
        self.scores[self.selected.index()]
    }
}

fn check_recommendations(recs: &[AgentRecommendation]) -> Result<()> {
    let mut seen = [false; 3];
    for r in recs {
        if std::mem::replace(&mut seen[r.agent.index()], true) {
            return Err(Error::InvalidInput(format!("duplicate recommendation from agent {}", r.agent)));
        }
    }
    if let Some(missing) = AgentId::ALL.into_iter().find(|a| !seen[a.index()]) {
        return Err(Error::InvalidInput(format!("no recommendation from agent {missing}")));
    }
    Ok(())
}

/// Weighted-confidence argmax restricted to the recommendation union.
pub fn fuse(recs: &[AgentRecommendation], weights: &[f64; 3]) -> Result<Fusion> {
    check_recommendations(recs)?;
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidInput(format!("weights must be non-negative: {weights:?}")));
    }

    let mut scores = [0.0; N_EMOTIONS];
    for r in recs {
        let w = weights[r.agent.index()];
        for e in Emotion::ALL {
            scores[e.index()] += w * r.confidence.prob(e);
        }
    }

    let union: Vec<Emotion> = Emotion::ALL
        .into_iter()
        .filter(|e| recs.iter().any(|r| r.recommended.contains(e)))
        .collect();

    let mut selected = union[0];
    for &e in &union[1..] {
        if scores[e.index()] > scores[selected.index()] {
            selected = e;
        }
    }
    Ok(Fusion {
        selected,
        scores,
        union,
    })
}

/// Cosine-annealed learning rate over `period` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineSchedule {
    pub eta_min: f64,
    pub eta_max: f64,
    pub period: f64,
}

impl CosineSchedule {
    pub fn rate(&self, t: f64) -> f64 {
        let phase = (t.min(self.period) / self.period) * std::f64::consts::PI;
        self.eta_min + 0.5 * (self.eta_max - self.eta_min) * (1.0 + phase.cos())
    }
}

/// Geometric decay `eps0 * decay^t` for agents that opt into epsilon exploration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub initial: f64,
    pub decay: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule {
            initial: 0.3,
            decay: 0.99,
        }
    }
}

impl ExplorationSchedule {
    pub fn rate(&self, t: u32) -> f64 {
        self.initial * self.decay.powi(t as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityConfig {
    pub dirichlet_alpha: f64,
    /// Micro-level learning rate.
    pub eta: f64,
    /// Macro-level step size.
    pub kappa: f64,
    pub exploration: ExplorationSchedule,
    /// Listed with the orchestrator settings; not consumed.
    pub discount: f64,
    /// Listed with the orchestrator settings; not consumed.
    pub replay_buffer: usize,
    /// Replaces the constant `eta` when set.
    pub cosine: Option<CosineSchedule>,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        ReliabilityConfig {
            dirichlet_alpha: 2.0,
            eta: 0.1,
            kappa: 0.2,
            exploration: ExplorationSchedule::default(),
            discount: 0.9,
            replay_buffer: 100,
            cosine: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityWeights {
    weights: [f64; 3],
    /// Number of micro observations absorbed so far.
    observations: u64,
    pub config: ReliabilityConfig,
}

impl Default for ReliabilityWeights {
    fn default() -> Self {
        ReliabilityWeights::new(ReliabilityConfig::default())
    }
}

impl ReliabilityWeights {
    pub fn new(config: ReliabilityConfig) -> Self {
        ReliabilityWeights {
            weights: [1.0 / 3.0; 3],
            observations: 0,
            config,
        }
    }

    pub fn from_weights(weights: [f64; 3], config: ReliabilityConfig) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidInput(format!("weights must be positive: {weights:?}")));
        }
        let mut w = ReliabilityWeights {
            weights,
            observations: 0,
            config,
        };
        w.normalize();
        Ok(w)
    }

    pub fn weights(&self) -> [f64; 3] {
        self.weights
    }

    pub fn weight(&self, agent: AgentId) -> f64 {
        self.weights[agent.index()]
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn with_observations(mut self, n: u64) -> Self {
        self.observations = n;
        self
    }

    fn normalize(&mut self) {
        for _ in 0..2 {
            let sum: f64 = self.weights.iter().sum();
            for w in &mut self.weights {
                *w = (*w / sum).max(WEIGHT_FLOOR);
            }
        }
        let sum: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w /= sum;
        }
    }

    pub fn current_eta(&self) -> f64 {
        match self.config.cosine {
            Some(s) => s.rate(self.observations as f64),
            None => self.config.eta,
        }
    }

    pub fn fuse(&self, recs: &[AgentRecommendation]) -> Result<Fusion> {
        fuse(recs, &self.weights)
    }

    /// Within-negotiation agreement update.
    pub fn micro_update(&mut self, recs: &[AgentRecommendation], selected: Emotion) -> Result<()> {
        check_recommendations(recs)?;
        let eta = self.current_eta();
        for r in recs {
            self.weights[r.agent.index()] *= 1.0 + eta * r.confidence.prob(selected);
        }
        self.normalize();
        self.observations += 1;
        Ok(())
    }

    /// End-of-negotiation update from the outcome and per-agent accuracy.
    pub fn macro_update(&mut self, success: bool, outcome: Option<f64>, accuracy: [f64; 3]) -> Result<()> {
        if accuracy.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidInput(format!("accuracy must lie in [0, 1]: {accuracy:?}")));
        }
        let mut raised = self.weights;
        if success {
            let rho = outcome.unwrap_or(0.0).clamp(0.0, 1.0);
            for (w, acc) in raised.iter_mut().zip(accuracy) {
                *w += self.config.kappa * rho * acc;
            }
        }
        let evidence = self.observations.max(1) as f64;
        let alpha = self.config.dirichlet_alpha;
        let total: f64 = raised.iter().map(|w| w * evidence).sum::<f64>() + 3.0 * alpha;
        for (w, r) in self.weights.iter_mut().zip(raised) {
            *w = (r * evidence + alpha) / total;
        }
        self.normalize();
        Ok(())
    }
}

/// Share of turns on which each agent's pick matched the selected emotion.
pub fn agent_accuracy(turns: &[(Vec<AgentRecommendation>, Emotion)]) -> [f64; 3] {
    let mut hits = [0usize; 3];
    let mut counts = [0usize; 3];
    for (recs, selected) in turns {
        for r in recs {
            counts[r.agent.index()] += 1;
            if r.pick == *selected {
                hits[r.agent.index()] += 1;
            }
        }
    }
    let mut acc = [0.0; 3];
    for i in 0..3 {
        if counts[i] > 0 {
            acc[i] = hits[i] as f64 / counts[i] as f64;
        }
    }
    acc
}

/// How an LLM-orchestrated decision was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Backend,
    /// Backend answered outside the union twice; fused with uniform weights.
    FallbackUniform,
    /// Backend failed; fused with the current weights.
    FallbackWeights,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrchestratorDecision {
    pub emotion: Emotion,
    pub source: DecisionSource,
    pub fusion: Fusion,
}

/// Context-reasoning orchestrator: asks a chat backend to choose among the
/// experts' recommendations.
pub fn llm_orchestrate(
    ctx: &NegotiationContext,
    recs: &[AgentRecommendation],
    backend: &dyn ChatBackend,
    weights: &[f64; 3],
) -> Result<OrchestratorDecision> {
    let current = fuse(recs, weights)?;
    let prompt = prompts::orchestrator_prompt(ctx, recs, &current.union);
    let mut messages = vec![ChatMessage::system(prompts::ORCHESTRATOR_SYSTEM), ChatMessage::user(prompt)];

    for attempt in 0..2 {
        let request = ChatRequest::new(Caller::Orchestrator, ctx.round, &messages, 0.0);
        let reply = match backend.chat(&request) {
            Ok(r) => r,
            Err(e) => {
                warn!("orchestrator backend failed ({e}); fusing with current weights");
                return Ok(OrchestratorDecision {
                    emotion: current.selected,
                    source: DecisionSource::FallbackWeights,
                    fusion: current,
                });
            }
        };
        match last_label_in(&reply) {
            Some(e) if current.union.contains(&e) => {
                return Ok(OrchestratorDecision {
                    emotion: e,
                    source: DecisionSource::Backend,
                    fusion: current,
                });
            }
            _ if attempt == 0 => {
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(prompts::orchestrator_retry(&current.union)));
            }
            _ => {}
        }
    }

    warn!("orchestrator reply outside the recommendation union twice; fusing with uniform weights");
    let uniform = fuse(recs, &[1.0 / 3.0; 3])?;
    Ok(OrchestratorDecision {
        emotion: uniform.selected,
        source: DecisionSource::FallbackUniform,
        fusion: uniform,
    })
}
