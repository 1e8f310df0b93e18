//! Emotion selection for LLM negotiation agents: payoff and Q-learning
//! selectors, a coherence assessor, Bayesian reliability fusion, scripted
//! and remote chat backends, scenario generation and run metrics.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod context;
pub mod emotion;
pub mod error;
pub mod experiment;
pub mod game_theory;
pub mod llm;
pub mod metrics;
pub mod negotiation;
pub mod orchestrator;
pub mod prompts;
pub mod rl;
pub mod scenarios;
