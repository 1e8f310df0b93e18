//! The negotiation context shared by every selector.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::emotion::{Emotion, EmotionHistory};
use crate::scenarios::{Domain, Scenario};

/// Dialogue stage, driven by the round counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Opening,
    Development,
    Intensive,
    Closing,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Opening, Phase::Development, Phase::Intensive, Phase::Closing];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::Opening => "opening",
            Phase::Development => "development",
            Phase::Intensive => "intensive",
            Phase::Closing => "closing",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Rounds 0-3 open, 4-7 develop, 8-12 intensify, later rounds close.
pub fn determine_phase(round: u32) -> Phase {
    match round {
        0..=3 => Phase::Opening,
        4..=7 => Phase::Development,
        8..=12 => Phase::Intensive,
        _ => Phase::Closing,
    }
}

/// How a negotiation ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Success,
    Failure,
    Timeout,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Success => "success",
            Status::Failure => "failure",
            Status::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegotiationContext {
    pub domain: Domain,
    pub round: u32,
    /// Negotiator's current emotion.
    pub negotiator_emotion: Emotion,
    /// Opponent's most recently recognized emotion.
    pub opponent_emotion: Emotion,
    pub phase: Phase,
    /// Offer distance relative to the negotiator's target.
    pub gap: f64,
    pub stake: f64,
    pub target: f64,
    pub negotiator_offer: Option<f64>,
    pub opponent_offer: Option<f64>,
    pub history: EmotionHistory,
    /// Orchestrator weights at the time the context was built, when one exists.
    pub weights: Option<[f64; 3]>,
}

impl NegotiationContext {
    pub const INITIAL_GAP: f64 = 1.0;

    /// Context before the first message: round 1, negotiator neutral.
    pub fn initial(scenario: &Scenario) -> Self {
        NegotiationContext {
            domain: scenario.domain,
            round: 1,
            negotiator_emotion: Emotion::Neutral,
            opponent_emotion: scenario.opponent_emotion.unwrap_or(Emotion::Neutral),
            phase: determine_phase(1),
            gap: Self::INITIAL_GAP,
            stake: scenario.stake,
            target: scenario.negotiator_target,
            negotiator_offer: None,
            opponent_offer: None,
            history: EmotionHistory::new(),
            weights: None,
        }
    }

    /// A bare context for unit tests and examples.
    pub fn synthetic(negotiator: Emotion, opponent: Emotion, round: u32, gap: f64) -> Self {
        NegotiationContext {
            domain: Domain::Debt,
            round,
            negotiator_emotion: negotiator,
            opponent_emotion: opponent,
            phase: determine_phase(round),
            gap,
            stake: 15_700.0,
            target: 30.0,
            negotiator_offer: None,
            opponent_offer: None,
            history: EmotionHistory::new(),
            weights: None,
        }
    }
}
