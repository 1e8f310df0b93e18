//! The negotiation loop.
//!
//! Each round the opponent speaks, its emotion is recognized, the negotiator's
//! policy selects an emotion, the negotiator speaks, and the judge decides
//! whether the parties agreed (checked first) or the talks failed. Offers are
//! then re-extracted and the context advanced. After `max_rounds` rounds
//! without a verdict the negotiation times out.
//!
//! Offline runs use scripted voices that tag every message with inline
//! markers: `[EMO:<label>]`, `[OFFER:<number>]`, `[ACCEPT:<number>]` and
//! `[REJECT]`.

use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coherence::{coherence_select, CoherenceConfig, FallbackAssessor, LlmAssessor};
use crate::context::{determine_phase, NegotiationContext, Phase, Status};
use crate::emotion::{argmax_with_tiebreak, last_label_in, Emotion, EmotionDistribution, Party};
use crate::error::{Error, Result};
use crate::game_theory::{classify_valence, GameTheoryAgent, PayoffMatrix, Valence, WslsState};
use crate::llm::{
    generate_turn, Caller, ChatBackend, ChatMessage, ChatRequest, TemperatureConfig, TurnPrompt,
};
use crate::metrics::{outcome_metric, EmotionPair, OutcomeRecord};
use crate::orchestrator::{
    agent_accuracy, llm_orchestrate, AgentRecommendation, DecisionSource, ReliabilityWeights,
};
use crate::prompts;
use crate::rl::{compute_reward, QLearningAgent, QTable};
use crate::scenarios::{Domain, OpponentStrategy, Scenario};

/// Guard against division by a zero target when computing the gap.
pub const GAP_EPSILON: f64 = 1e-9;
pub const DEFAULT_MAX_ROUNDS: u32 = 30;

/// Inline message markers used by scripted voices and judges.
pub mod markers {
    use crate::emotion::Emotion;

    fn values<'a>(text: &'a str, tag: &str) -> impl Iterator<Item = &'a str> + 'a {
        let open = format!("[{tag}:");
        let mut rest = text;
        std::iter::from_fn(move || {
            let i = rest.find(&open)?;
            let after = &rest[i + open.len()..];
            let j = after.find(']')?;
            rest = &after[j + 1..];
            Some(after[..j].trim())
        })
    }

    /// The first `[EMO:x]` naming a known emotion.
    pub fn emotion(text: &str) -> Option<Emotion> {
        values(text, "EMO").find_map(|v| v.parse().ok())
    }

    /// The last numeric `[OFFER:n]`.
    pub fn offer(text: &str) -> Option<f64> {
        values(text, "OFFER").filter_map(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite()).last()
    }

    pub fn accept(text: &str) -> Option<f64> {
        values(text, "ACCEPT").filter_map(|v| v.parse::<f64>().ok()).find(|v| v.is_finite())
    }

    pub fn reject(text: &str) -> bool {
        text.contains("[REJECT]")
    }
}

/// Emotion expressed in `message`. Scripted backends read the `[EMO:x]`
/// marker; others are prompted, with one retry, and neutral is the answer
/// when no label can be read.
pub fn recognize_emotion(
    message: &str,
    context: &[(Party, String)],
    round: u32,
    backend: &dyn ChatBackend,
) -> Result<Emotion> {
    if backend.is_scripted() {
        return Ok(markers::emotion(message).unwrap_or(Emotion::Neutral));
    }
    let mut messages = vec![ChatMessage::user(prompts::recognition_prompt(message, context))];
    for attempt in 0..2 {
        let reply = backend.chat(&ChatRequest::new(Caller::Recognizer, round, &messages, 0.0))?;
        if let Some(e) = last_label_in(&reply) {
            return Ok(e);
        }
        if attempt == 0 {
            messages.push(ChatMessage::assistant(reply));
            messages.push(ChatMessage::user(prompts::RECOGNITION_RETRY.trim_end()));
        }
    }
    warn!("no emotion label in recognizer reply; using neutral");
    Ok(Emotion::Neutral)
}

/// First number in `text`, if any.
pub fn first_number(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = if i > 0 && bytes[i - 1] == b'-' { i - 1 } else { i };
            let mut end = i;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.' || bytes[end] == b',') {
                end += 1;
            }
            let token: String = text[start..end].trim_end_matches(['.', ',']).replace(',', "");
            return token.parse().ok();
        }
        i += 1;
    }
    None
}

/// Numeric position stated in `message`: the `[OFFER:n]` marker for scripted
/// backends, otherwise the value-extraction prompt.
pub fn extract_offer(message: &str, domain: Domain, round: u32, backend: &dyn ChatBackend) -> Result<Option<f64>> {
    if backend.is_scripted() {
        return Ok(markers::offer(message));
    }
    let messages = [ChatMessage::user(prompts::extraction_prompt(message, domain))];
    let reply = backend.chat(&ChatRequest::new(Caller::Extractor, round, &messages, 0.0))?;
    if reply.trim().to_ascii_uppercase().starts_with("NONE") {
        return Ok(None);
    }
    Ok(first_number(&reply).filter(|v| v.is_finite()))
}

/// Relative distance between the two latest offers.
pub fn relative_gap(negotiator_offer: f64, opponent_offer: f64, target: f64) -> f64 {
    (negotiator_offer - opponent_offer).abs() / target.abs().max(GAP_EPSILON)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "verdict", content = "value")]
pub enum Verdict {
    Continue,
    Agreement(f64),
    Failure,
}

/// What the judge sees after both parties have spoken in a round.
pub struct JudgeView<'a> {
    pub round: u32,
    pub domain: Domain,
    pub history: &'a [(Party, String)],
    /// Context with this round's offers already extracted.
    pub context: &'a NegotiationContext,
}

impl JudgeView<'_> {
    /// This round's messages, opponent first.
    pub fn this_round(&self) -> &[(Party, String)] {
        &self.history[self.history.len().saturating_sub(2)..]
    }
}

/// Decides whether a negotiation has ended. Agreement takes precedence
/// over failure.
pub trait Judge {
    fn evaluate(&self, view: &JudgeView<'_>) -> Result<Verdict>;
}

/// Agreement on an `[ACCEPT:v]` marker, failure on `[REJECT]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MarkerJudge;

impl Judge for MarkerJudge {
    fn evaluate(&self, view: &JudgeView<'_>) -> Result<Verdict> {
        let round = view.this_round();
        if let Some(v) = round.iter().find_map(|(_, t)| markers::accept(t)) {
            return Ok(Verdict::Agreement(v));
        }
        if round.iter().any(|(_, t)| markers::reject(t)) {
            return Ok(Verdict::Failure);
        }
        Ok(Verdict::Continue)
    }
}

/// Agreement at the midpoint once the relative gap is within `threshold`.
/// Never declares failure.
#[derive(Clone, Copy, Debug)]
pub struct GapJudge {
    pub threshold: f64,
}

impl Judge for GapJudge {
    fn evaluate(&self, view: &JudgeView<'_>) -> Result<Verdict> {
        let ctx = view.context;
        match (ctx.negotiator_offer, ctx.opponent_offer) {
            (Some(n), Some(o)) if relative_gap(n, o, ctx.target) <= self.threshold => Ok(Verdict::Agreement((n + o) / 2.0)),
            _ => Ok(Verdict::Continue),
        }
    }
}

/// Asks a chat model to read the dialogue.
pub struct LlmJudge {
    pub backend: Arc<dyn ChatBackend>,
}

/// `AGREEMENT: v`, `FAILED` or anything else (continue).
pub fn parse_verdict(reply: &str) -> Verdict {
    let mut failed = false;
    for line in reply.lines() {
        let upper = line.trim().to_ascii_uppercase();
        if upper.starts_with("AGREEMENT") {
            if let Some(v) = line.split_once(':').and_then(|(_, rest)| first_number(rest)) {
                return Verdict::Agreement(v);
            }
        } else if upper.starts_with("FAILED") {
            failed = true;
        }
    }
    if failed {
        Verdict::Failure
    } else {
        Verdict::Continue
    }
}

impl Judge for LlmJudge {
    fn evaluate(&self, view: &JudgeView<'_>) -> Result<Verdict> {
        let messages = [ChatMessage::user(prompts::judge_prompt(view.history, view.domain))];
        let reply = self.backend.chat(&ChatRequest::new(Caller::Judge, view.round, &messages, 0.0))?;
        Ok(parse_verdict(&reply))
    }
}

/// What a voice is asked to say.
pub struct SpeakRequest<'a> {
    pub scenario: &'a Scenario,
    pub speaker: Party,
    pub round: u32,
    pub phase: Phase,
    pub history: &'a [(Party, String)],
    /// Emotion to express, when the policy selected one.
    pub target_emotion: Option<Emotion>,
    pub confidence: f64,
    pub guidance: Option<&'a str>,
}

/// Produces one party's messages.
pub trait Voice {
    fn begin(&mut self, _scenario: &Scenario) {}
    fn speak(&mut self, request: &SpeakRequest<'_>, rng: &mut dyn RngCore) -> Result<String>;
}

/// Chat-model voice.
pub struct LlmVoice {
    pub backend: Arc<dyn ChatBackend>,
    pub party: Party,
    pub strategy: OpponentStrategy,
    pub temperatures: TemperatureConfig,
    /// Characters of dialogue history sent with each request.
    pub history_budget: usize,
    system: String,
}

impl LlmVoice {
    pub fn new(backend: Arc<dyn ChatBackend>, party: Party, strategy: OpponentStrategy) -> Self {
        LlmVoice {
            backend,
            party,
            strategy,
            temperatures: TemperatureConfig::default(),
            history_budget: 12_000,
            system: String::new(),
        }
    }
}

impl Voice for LlmVoice {
    fn begin(&mut self, scenario: &Scenario) {
        self.system = match self.party {
            Party::Negotiator => prompts::negotiator_system(scenario, false),
            Party::Opponent => prompts::opponent_system(scenario, self.strategy, false),
        };
    }

    fn speak(&mut self, request: &SpeakRequest<'_>, _rng: &mut dyn RngCore) -> Result<String> {
        let prompt = TurnPrompt {
            speaker: self.party,
            round: request.round,
            system: self.system.clone(),
            history: request.history,
            target_emotion: request.target_emotion,
            guidance: request.guidance.map(|g| g.trim_end().to_string()),
            history_budget: self.history_budget,
        };
        generate_turn(&prompt, request.confidence, request.phase, &self.temperatures, self.backend.as_ref())
    }
}

fn last_from(history: &[(Party, String)], party: Party) -> Option<&str> {
    history.iter().rev().find(|(p, _)| *p == party).map(|(_, t)| t.as_str())
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn line_for(party: Party, e: Emotion) -> &'static str {
    match (party, e) {
        (Party::Negotiator, Emotion::Joy) => "I appreciate your openness and I think we are close.",
        (Party::Negotiator, Emotion::Sadness) => "It is disappointing that we are still this far apart.",
        (Party::Negotiator, Emotion::Anger) => "Frankly, these delays are no longer acceptable.",
        (Party::Negotiator, Emotion::Fear) => "I am worried about what happens if we cannot settle this soon.",
        (Party::Negotiator, Emotion::Surprise) => "I did not expect that. Maybe it opens a path.",
        (Party::Negotiator, Emotion::Disgust) => "That proposal is hard to take seriously.",
        (Party::Negotiator, Emotion::Neutral) => "Let us look at the numbers calmly.",
        (Party::Opponent, Emotion::Joy) => "That sounds more reasonable, thank you.",
        (Party::Opponent, Emotion::Sadness) => "I am exhausted, this has been a terrible stretch.",
        (Party::Opponent, Emotion::Anger) => "You keep pushing and it is not fair.",
        (Party::Opponent, Emotion::Fear) => "I am scared I will not manage this.",
        (Party::Opponent, Emotion::Surprise) => "Wait, that is not what I expected.",
        (Party::Opponent, Emotion::Disgust) => "Honestly, this whole process is insulting.",
        (Party::Opponent, Emotion::Neutral) => "Here is where I stand.",
    }
}

fn strategy_line(s: OpponentStrategy) -> &'static str {
    match s {
        OpponentStrategy::Vanilla => "",
        OpponentStrategy::Pressuring => " I need an answer today, my options are running out.",
        OpponentStrategy::Victim => " You have no idea how hard this has been for me.",
        OpponentStrategy::Threatening => " If this goes on, I will take it further.",
    }
}

/// Signed shortfall of `offer` from `wanted` as seen by a party that prefers
/// lower values when `prefers_lower`, relative to `scale`.
fn shortfall(offer: f64, wanted: f64, prefers_lower: bool, scale: f64) -> f64 {
    let d = if prefers_lower { offer - wanted } else { wanted - offer };
    d / scale.abs().max(GAP_EPSILON)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedOpponentParams {
    /// Share of the remaining distance conceded per round at full payoff.
    pub concession: f64,
    /// Relative distance (to the negotiator's target) the opponent accepts.
    pub tolerance: f64,
    /// Accumulated frustration at which the opponent walks away.
    pub patience: f64,
}

impl Default for ScriptedOpponentParams {
    fn default() -> Self {
        ScriptedOpponentParams {
            concession: 0.2,
            tolerance: 0.05,
            patience: 2.5,
        }
    }
}

/// Rule-based opponent. It concedes in proportion to the payoff the
/// negotiator's last emotion gives it, grows frustrated at low payoffs,
/// and picks its next emotion with a strategy-dependent bias.
pub struct ScriptedOpponent {
    pub strategy: OpponentStrategy,
    pub params: ScriptedOpponentParams,
    pub payoff: PayoffMatrix,
    offer: f64,
    emotion: Emotion,
    frustration: f64,
}

impl ScriptedOpponent {
    pub fn new(strategy: OpponentStrategy) -> Self {
        ScriptedOpponent {
            strategy,
            params: ScriptedOpponentParams::default(),
            payoff: PayoffMatrix::published(),
            offer: 0.0,
            emotion: Emotion::Neutral,
            frustration: 0.0,
        }
    }

    fn resistance(&self) -> f64 {
        match self.strategy {
            OpponentStrategy::Vanilla => 1.0,
            OpponentStrategy::Victim => 0.9,
            OpponentStrategy::Pressuring => 0.8,
            OpponentStrategy::Threatening => 0.7,
        }
    }

    fn emotion_weights(&self, client_payoff: f64) -> [f64; 7] {
        use Emotion::*;
        let mut w = [1.0; 7];
        let bias: &[Emotion] = match self.strategy {
            OpponentStrategy::Vanilla => &[Neutral],
            OpponentStrategy::Pressuring => &[Anger, Surprise],
            OpponentStrategy::Victim => &[Sadness, Fear],
            OpponentStrategy::Threatening => &[Anger, Disgust],
        };
        for e in bias {
            w[e.index()] += 2.0;
        }
        w[Joy.index()] += 3.0 * client_payoff;
        w[Anger.index()] += 2.0 * (1.0 - client_payoff);
        w[self.emotion.index()] += 1.0;
        w
    }
}

impl Voice for ScriptedOpponent {
    fn begin(&mut self, scenario: &Scenario) {
        self.offer = round2(scenario.opponent_target);
        self.emotion = scenario.opponent_emotion.unwrap_or(Emotion::Neutral);
        self.frustration = 0.0;
    }

    fn speak(&mut self, request: &SpeakRequest<'_>, rng: &mut dyn RngCore) -> Result<String> {
        let scenario = request.scenario;
        let prefers_lower = !scenario.domain.lower_is_better();
        let Some(last) = last_from(request.history, Party::Negotiator) else {
            return Ok(format!(
                "[EMO:{}] [OFFER:{}] {}{}",
                self.emotion,
                self.offer,
                line_for(Party::Opponent, self.emotion),
                strategy_line(self.strategy)
            ));
        };

        let their_emotion = markers::emotion(last).unwrap_or(Emotion::Neutral);
        let client_payoff = f64::from(self.payoff.lookup(self.emotion, their_emotion).0) / PayoffMatrix::MAX_PAYOFF as f64;
        self.frustration = (self.frustration + 0.6 - client_payoff).max(0.0);
        if self.frustration > self.params.patience {
            self.emotion = Emotion::Anger;
            return Ok(format!("[EMO:anger] [REJECT] I am done with this.{}", strategy_line(self.strategy)));
        }

        if let Some(n) = markers::offer(last) {
            if shortfall(n, self.offer, prefers_lower, scenario.negotiator_target) <= self.params.tolerance {
                self.emotion = Emotion::Joy;
                return Ok(format!("[EMO:joy] [ACCEPT:{n}] [OFFER:{n}] Fine, I can accept that."));
            }
            let step = self.params.concession * client_payoff * self.resistance();
            self.offer = round2(self.offer + (n - self.offer) * step);
        }

        let dist = EmotionDistribution::from_weights(self.emotion_weights(client_payoff))?;
        self.emotion = dist.sample(rng);
        Ok(format!(
            "[EMO:{}] [OFFER:{}] {}{}",
            self.emotion,
            self.offer,
            line_for(Party::Opponent, self.emotion),
            strategy_line(self.strategy)
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedNegotiatorParams {
    /// Opening offer sits this fraction beyond the target in the favorable direction.
    pub anchor: f64,
    /// Share of the remaining distance conceded per round.
    pub concession: f64,
    /// Furthest the offer may move past the target, relative to it.
    pub reservation: f64,
    pub tolerance: f64,
}

impl Default for ScriptedNegotiatorParams {
    fn default() -> Self {
        ScriptedNegotiatorParams {
            anchor: 0.4,
            concession: 0.08,
            reservation: 0.25,
            tolerance: 0.05,
        }
    }
}

/// Rule-based negotiator that always voices its target emotion as a marker.
/// Without a target it answers with the emotion that pays it most against
/// the opponent's last one.
pub struct ScriptedNegotiator {
    pub params: ScriptedNegotiatorParams,
    pub payoff: PayoffMatrix,
    offer: f64,
}

impl Default for ScriptedNegotiator {
    fn default() -> Self {
        ScriptedNegotiator {
            params: ScriptedNegotiatorParams::default(),
            payoff: PayoffMatrix::published(),
            offer: 0.0,
        }
    }
}

impl Voice for ScriptedNegotiator {
    fn begin(&mut self, scenario: &Scenario) {
        let t = scenario.negotiator_target;
        let a = self.params.anchor;
        self.offer = round2(if scenario.domain.lower_is_better() { t * (1.0 - a) } else { t * (1.0 + a) });
    }

    fn speak(&mut self, request: &SpeakRequest<'_>, _rng: &mut dyn RngCore) -> Result<String> {
        let scenario = request.scenario;
        let last = last_from(request.history, Party::Opponent).unwrap_or("");
        let their_emotion = markers::emotion(last).unwrap_or(Emotion::Neutral);
        let emotion = match request.target_emotion {
            Some(e) => e,
            None => argmax_with_tiebreak(&self.payoff.agent_row(their_emotion))?,
        };
        let line = line_for(Party::Negotiator, emotion);

        if let Some(v) = markers::accept(last) {
            return Ok(format!("[EMO:{emotion}] [OFFER:{v}] Then we have a deal. {line}"));
        }
        if let Some(o) = markers::offer(last) {
            let prefers_lower = scenario.domain.lower_is_better();
            if shortfall(o, self.offer, prefers_lower, scenario.negotiator_target) <= self.params.tolerance {
                return Ok(format!("[EMO:{emotion}] [ACCEPT:{o}] [OFFER:{o}] Agreed. {line}"));
            }
            let pressure = if classify_valence(their_emotion) == Valence::Negative { 1.5 } else { 1.0 };
            let t = scenario.negotiator_target;
            let next = self.offer + (o - self.offer) * self.params.concession * pressure;
            let next = if prefers_lower {
                next.min(t * (1.0 + self.params.reservation))
            } else {
                next.max(t * (1.0 - self.params.reservation))
            };
            self.offer = round2(next);
        }
        Ok(format!("[EMO:{emotion}] [OFFER:{}] {line}", self.offer))
    }
}

/// How a finished negotiation went, as reported to learning policies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub status: Status,
    pub rounds: u32,
    pub outcome: Option<f64>,
}

/// A policy's choice for one negotiator turn.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Selection {
    /// `None` leaves the choice to the voice.
    pub emotion: Option<Emotion>,
    pub confidence: f64,
    pub recommendations: Vec<AgentRecommendation>,
    pub weights: Option<[f64; 3]>,
    pub decision: Option<DecisionSource>,
}

/// Chooses the negotiator's emotion each turn.
pub trait EmotionPolicy {
    fn name(&self) -> &'static str;
    fn begin(&mut self, _scenario: &Scenario) {}
    fn select(&mut self, ctx: &NegotiationContext, rng: &mut dyn RngCore) -> Result<Selection>;
    /// `ctx` is the context the selection was made in; `used` the emotion
    /// the negotiator ended up expressing.
    fn observe(&mut self, _ctx: &NegotiationContext, _selection: &Selection, _used: Emotion) -> Result<()> {
        Ok(())
    }
    fn finish(&mut self, _outcome: &EpisodeOutcome) -> Result<()> {
        Ok(())
    }
    /// Extra instruction for the negotiator's prompt.
    fn guidance(&self) -> Option<&str> {
        None
    }
    fn reliability(&self) -> Option<&ReliabilityWeights> {
        None
    }
    fn qtable(&self) -> Option<&QTable> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "vanilla")]
    Vanilla,
    #[serde(rename = "vanilla+prompt")]
    PromptGuided,
    #[serde(rename = "game_theory")]
    GameTheory,
    #[serde(rename = "q_learning")]
    QLearning,
    #[serde(rename = "coherence")]
    Coherence,
    #[serde(rename = "emomas_llm")]
    EmoMasLlm,
    #[serde(rename = "emomas_bayes")]
    EmoMasBayes,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Vanilla,
        PolicyKind::PromptGuided,
        PolicyKind::GameTheory,
        PolicyKind::QLearning,
        PolicyKind::Coherence,
        PolicyKind::EmoMasLlm,
        PolicyKind::EmoMasBayes,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Vanilla => "vanilla",
            PolicyKind::PromptGuided => "vanilla+prompt",
            PolicyKind::GameTheory => "game_theory",
            PolicyKind::QLearning => "q_learning",
            PolicyKind::Coherence => "coherence",
            PolicyKind::EmoMasLlm => "emomas_llm",
            PolicyKind::EmoMasBayes => "emomas_bayes",
        }
    }

    /// Whether the policy carries learning state across negotiations.
    pub fn learns(self) -> bool {
        matches!(self, PolicyKind::QLearning | PolicyKind::EmoMasLlm | PolicyKind::EmoMasBayes)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let valid: Vec<&str> = PolicyKind::ALL.iter().map(|p| p.label()).collect();
                Error::Usage(format!("unknown negotiator policy '{s}' (expected one of: {})", valid.join(", ")))
            })
    }
}

/// Neutral every turn.
#[derive(Clone, Copy, Debug, Default)]
pub struct VanillaPolicy;

impl EmotionPolicy for VanillaPolicy {
    fn name(&self) -> &'static str {
        "vanilla"
    }

    fn select(&mut self, _ctx: &NegotiationContext, _rng: &mut dyn RngCore) -> Result<Selection> {
        Ok(Selection {
            emotion: Some(Emotion::Neutral),
            confidence: 1.0,
            ..Selection::default()
        })
    }
}

/// No selector; the prompt asks the negotiator to choose a tone itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct PromptGuidedPolicy;

impl EmotionPolicy for PromptGuidedPolicy {
    fn name(&self) -> &'static str {
        "vanilla+prompt"
    }

    fn select(&mut self, _ctx: &NegotiationContext, _rng: &mut dyn RngCore) -> Result<Selection> {
        Ok(Selection {
            emotion: None,
            confidence: 0.5,
            ..Selection::default()
        })
    }

    fn guidance(&self) -> Option<&str> {
        Some(prompts::VANILLA_GUIDANCE)
    }
}

fn single(rec: AgentRecommendation) -> Selection {
    Selection {
        emotion: Some(rec.pick),
        confidence: rec.confidence.prob(rec.pick),
        recommendations: vec![rec],
        weights: None,
        decision: None,
    }
}

/// Win-stay, lose-shift over the payoff table.
#[derive(Clone, Debug, Default)]
pub struct GameTheoryPolicy {
    pub agent: GameTheoryAgent,
    state: WslsState,
}

impl GameTheoryPolicy {
    pub fn new(agent: GameTheoryAgent) -> Self {
        let state = agent.new_state();
        GameTheoryPolicy { agent, state }
    }
}

impl EmotionPolicy for GameTheoryPolicy {
    fn name(&self) -> &'static str {
        "game_theory"
    }

    fn begin(&mut self, _scenario: &Scenario) {
        self.state = self.agent.new_state();
    }

    fn select(&mut self, ctx: &NegotiationContext, _rng: &mut dyn RngCore) -> Result<Selection> {
        Ok(single(self.agent.select(ctx.opponent_emotion, &mut self.state)))
    }
}

pub struct QLearningPolicy {
    pub agent: QLearningAgent,
}

impl EmotionPolicy for QLearningPolicy {
    fn name(&self) -> &'static str {
        "q_learning"
    }

    fn begin(&mut self, _scenario: &Scenario) {
        self.agent.begin();
    }

    fn select(&mut self, ctx: &NegotiationContext, rng: &mut dyn RngCore) -> Result<Selection> {
        Ok(single(self.agent.recommend(ctx, rng)))
    }

    fn observe(&mut self, ctx: &NegotiationContext, _selection: &Selection, used: Emotion) -> Result<()> {
        self.agent.observe(ctx, used)
    }

    fn finish(&mut self, outcome: &EpisodeOutcome) -> Result<()> {
        self.agent.finish(compute_reward(outcome.status, outcome.rounds, outcome.outcome))
    }

    fn qtable(&self) -> Option<&QTable> {
        Some(&self.agent.table)
    }
}

fn coherence_recommend(
    ctx: &NegotiationContext,
    config: &CoherenceConfig,
    backend: Option<&Arc<dyn ChatBackend>>,
    rng: &mut dyn RngCore,
) -> Result<AgentRecommendation> {
    match backend {
        Some(b) if !b.is_scripted() => coherence_select(ctx, config, &LlmAssessor::new(b.as_ref()), rng),
        _ => coherence_select(ctx, config, &FallbackAssessor::default(), rng),
    }
}

pub struct CoherencePolicy {
    pub config: CoherenceConfig,
    /// Chat model for the assessment; table scoring when absent or scripted.
    pub backend: Option<Arc<dyn ChatBackend>>,
}

impl EmotionPolicy for CoherencePolicy {
    fn name(&self) -> &'static str {
        "coherence"
    }

    fn select(&mut self, ctx: &NegotiationContext, rng: &mut dyn RngCore) -> Result<Selection> {
        Ok(single(coherence_recommend(ctx, &self.config, self.backend.as_ref(), rng)?))
    }
}

/// The three expert selectors shared by both orchestrated policies.
pub struct Experts {
    pub game_theory: GameTheoryAgent,
    pub q_learning: QLearningAgent,
    pub coherence: CoherenceConfig,
    pub assessor: Option<Arc<dyn ChatBackend>>,
    wsls: WslsState,
}

impl Experts {
    pub fn new(
        game_theory: GameTheoryAgent,
        q_learning: QLearningAgent,
        coherence: CoherenceConfig,
        assessor: Option<Arc<dyn ChatBackend>>,
    ) -> Self {
        let wsls = game_theory.new_state();
        Experts {
            game_theory,
            q_learning,
            coherence,
            assessor,
            wsls,
        }
    }

    fn begin(&mut self) {
        self.wsls = self.game_theory.new_state();
        self.q_learning.begin();
    }

    /// Recommendations in agent order: game theory, Q-learning, coherence.
    pub fn recommend(&mut self, ctx: &NegotiationContext, rng: &mut dyn RngCore) -> Result<Vec<AgentRecommendation>> {
        let gt = self.game_theory.select(ctx.opponent_emotion, &mut self.wsls);
        let rl = self.q_learning.recommend(ctx, rng);
        let ec = coherence_recommend(ctx, &self.coherence, self.assessor.as_ref(), rng)?;
        Ok(vec![gt, rl, ec])
    }

    fn observe(&mut self, ctx: &NegotiationContext, used: Emotion) -> Result<()> {
        // WSLS judges the exchange that actually happened, not its own pick.
        self.wsls.last_agent_emotion = Some(used);
        self.q_learning.observe(ctx, used)
    }
}

/// How the orchestrated policy turns recommendations into one emotion.
pub enum Fuser {
    /// Reliability-weighted fusion.
    Bayes,
    /// Chat-model reasoning over the recommendations.
    Llm(Arc<dyn ChatBackend>),
}

/// Expert recommendations fused by the orchestrator, with reliability
/// weights updated every turn and after every negotiation.
pub struct OrchestratedPolicy {
    pub experts: Experts,
    pub weights: ReliabilityWeights,
    pub fuser: Fuser,
    turns: Vec<(Vec<AgentRecommendation>, Emotion)>,
}

impl OrchestratedPolicy {
    pub fn new(experts: Experts, weights: ReliabilityWeights, fuser: Fuser) -> Self {
        OrchestratedPolicy {
            experts,
            weights,
            fuser,
            turns: Vec::new(),
        }
    }
}

impl EmotionPolicy for OrchestratedPolicy {
    fn name(&self) -> &'static str {
        match self.fuser {
            Fuser::Bayes => "emomas_bayes",
            Fuser::Llm(_) => "emomas_llm",
        }
    }

    fn begin(&mut self, _scenario: &Scenario) {
        self.experts.begin();
        self.turns.clear();
    }

    fn select(&mut self, ctx: &NegotiationContext, rng: &mut dyn RngCore) -> Result<Selection> {
        let recs = self.experts.recommend(ctx, rng)?;
        let w = self.weights.weights();
        let (emotion, score, decision) = match &self.fuser {
            Fuser::Bayes => {
                let f = self.weights.fuse(&recs)?;
                (f.selected, f.selected_score(), DecisionSource::Backend)
            }
            Fuser::Llm(backend) => {
                let d = llm_orchestrate(ctx, &recs, backend.as_ref(), &w)?;
                let score = d.fusion.scores[d.emotion.index()];
                (d.emotion, score, d.source)
            }
        };
        let total: f64 = w.iter().sum();
        Ok(Selection {
            emotion: Some(emotion),
            confidence: (score / total).clamp(0.0, 1.0),
            recommendations: recs,
            weights: Some(w),
            decision: Some(decision),
        })
    }

    fn observe(&mut self, ctx: &NegotiationContext, selection: &Selection, used: Emotion) -> Result<()> {
        self.weights.micro_update(&selection.recommendations, used)?;
        self.turns.push((selection.recommendations.clone(), used));
        self.experts.observe(ctx, used)
    }

    fn finish(&mut self, outcome: &EpisodeOutcome) -> Result<()> {
        self.experts
            .q_learning
            .finish(compute_reward(outcome.status, outcome.rounds, outcome.outcome))?;
        let accuracy = agent_accuracy(&self.turns);
        self.weights
            .macro_update(outcome.status == Status::Success, outcome.outcome, accuracy)?;
        self.turns.clear();
        Ok(())
    }

    fn reliability(&self) -> Option<&ReliabilityWeights> {
        Some(&self.weights)
    }

    fn qtable(&self) -> Option<&QTable> {
        Some(&self.experts.q_learning.table)
    }
}

/// One message in a transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub case_id: String,
    pub round: u32,
    pub party: Party,
    pub text: String,
    /// Recognized emotion for opponent turns; the expressed marker, when
    /// present, for negotiator turns.
    pub emotion: Option<Emotion>,
    pub selected: Option<Emotion>,
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recommendations: Vec<AgentRecommendation>,
    pub weights: Option<[f64; 3]>,
    pub decision: Option<DecisionSource>,
    pub offer: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSummary {
    pub case_id: String,
    pub domain: Domain,
    pub status: Status,
    pub rounds: u32,
    pub agreed: Option<f64>,
    pub outcome: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub turns: Vec<Turn>,
    pub summary: TranscriptSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Turn(Turn),
    Summary(TranscriptSummary),
}

impl Transcript {
    pub fn status(&self) -> Status {
        self.summary.status
    }

    /// One turn per line, then the summary line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.turns {
            out.push_str(&serde_json::to_string(&Record::Turn(t.clone())).expect("serializable"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&Record::Summary(self.summary.clone())).expect("serializable"));
        out.push('\n');
        out
    }

    /// Parses any number of transcripts, each closed by its summary line.
    pub fn from_jsonl(text: &str) -> Result<Vec<Transcript>> {
        let mut out = Vec::new();
        let mut turns = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            match record {
                Record::Turn(t) => turns.push(t),
                Record::Summary(summary) => out.push(Transcript {
                    turns: std::mem::take(&mut turns),
                    summary,
                }),
            }
        }
        if !turns.is_empty() {
            return Err(Error::Parse {
                line: text.lines().count(),
                reason: "turn records after the last summary".into(),
            });
        }
        Ok(out)
    }

    pub fn negotiator_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.party == Party::Negotiator)
    }

    pub fn outcome_record(&self, target: f64) -> Result<OutcomeRecord> {
        let emotions = self
            .negotiator_turns()
            .map(|t| EmotionPair {
                selected: t.selected,
                expressed: t.emotion,
            })
            .collect();
        OutcomeRecord::new(
            self.summary.domain,
            self.summary.case_id.clone(),
            self.summary.status,
            self.summary.rounds.max(1),
            target,
            self.summary.agreed,
            emotions,
        )
    }
}

/// Everyone taking part in a negotiation.
pub struct Participants<'a> {
    pub negotiator: &'a mut dyn EmotionPolicy,
    pub negotiator_voice: &'a mut dyn Voice,
    pub opponent_voice: &'a mut dyn Voice,
    pub judge: &'a dyn Judge,
    /// Backend for emotion recognition and offer extraction.
    pub perception: &'a dyn ChatBackend,
}

struct Loop<'s> {
    scenario: &'s Scenario,
    ctx: NegotiationContext,
    history: Vec<(Party, String)>,
    turns: Vec<Turn>,
}

impl Loop<'_> {
    fn turn(&self, party: Party, text: String) -> Turn {
        Turn {
            case_id: self.scenario.case_id.clone(),
            round: self.ctx.round,
            party,
            text,
            emotion: None,
            selected: None,
            confidence: None,
            recommendations: Vec::new(),
            weights: None,
            decision: None,
            offer: None,
        }
    }

    fn refresh_gap(&mut self) {
        if let (Some(n), Some(o)) = (self.ctx.negotiator_offer, self.ctx.opponent_offer) {
            self.ctx.gap = relative_gap(n, o, self.ctx.target);
        }
    }

    fn round(&mut self, p: &mut Participants<'_>, rng: &mut dyn RngCore) -> Result<Verdict> {
        let round = self.ctx.round;
        let phase = self.ctx.phase;
        let domain = self.scenario.domain;

        let text = p.opponent_voice.speak(
            &SpeakRequest {
                scenario: self.scenario,
                speaker: Party::Opponent,
                round,
                phase,
                history: &self.history,
                target_emotion: None,
                confidence: 0.5,
                guidance: None,
            },
            rng,
        )?;
        let recognized = recognize_emotion(&text, &self.history, round, p.perception)?;
        let offer = extract_offer(&text, domain, round, p.perception)?;
        self.ctx.opponent_emotion = recognized;
        self.ctx.history.push(Party::Opponent, recognized);
        if offer.is_some() {
            self.ctx.opponent_offer = offer;
        }
        let mut turn = self.turn(Party::Opponent, text.clone());
        turn.emotion = Some(recognized);
        turn.offer = offer;
        self.turns.push(turn);
        self.history.push((Party::Opponent, text));

        self.ctx.weights = p.negotiator.reliability().map(|w| w.weights());
        let selection = p.negotiator.select(&self.ctx, rng)?;
        let text = p.negotiator_voice.speak(
            &SpeakRequest {
                scenario: self.scenario,
                speaker: Party::Negotiator,
                round,
                phase,
                history: &self.history,
                target_emotion: selection.emotion,
                confidence: selection.confidence,
                guidance: p.negotiator.guidance(),
            },
            rng,
        )?;
        let expressed = markers::emotion(&text);
        let used = match (selection.emotion, expressed) {
            (Some(e), _) => e,
            (None, Some(e)) => e,
            (None, None) => recognize_emotion(&text, &self.history, round, p.perception)?,
        };
        p.negotiator.observe(&self.ctx, &selection, used)?;
        let offer = extract_offer(&text, domain, round, p.perception)?;
        self.ctx.negotiator_emotion = used;
        self.ctx.history.push(Party::Negotiator, used);
        if offer.is_some() {
            self.ctx.negotiator_offer = offer;
        }
        self.refresh_gap();

        let mut turn = self.turn(Party::Negotiator, text.clone());
        turn.emotion = expressed.or(selection.emotion.is_none().then_some(used));
        turn.selected = selection.emotion;
        turn.confidence = Some(selection.confidence);
        turn.recommendations = selection.recommendations;
        turn.weights = selection.weights;
        turn.decision = selection.decision;
        turn.offer = offer;
        self.turns.push(turn);
        self.history.push((Party::Negotiator, text));

        p.judge.evaluate(&JudgeView {
            round,
            domain,
            history: &self.history,
            context: &self.ctx,
        })
    }
}

/// Runs one negotiation. Backend failures end it early with status timeout
/// and the error recorded in the summary; the transcript so far is kept.
pub fn run_negotiation(scenario: &Scenario, p: &mut Participants<'_>, max_rounds: u32, seed: u64) -> Result<Transcript> {
    if max_rounds == 0 {
        return Err(Error::param("max_rounds", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    p.negotiator.begin(scenario);
    p.negotiator_voice.begin(scenario);
    p.opponent_voice.begin(scenario);

    let mut lp = Loop {
        scenario,
        ctx: NegotiationContext::initial(scenario),
        history: Vec::new(),
        turns: Vec::new(),
    };
    let mut status = Status::Timeout;
    let mut agreed = None;
    let mut error = None;
    let mut rounds = 0;

    while rounds < max_rounds {
        rounds += 1;
        match lp.round(p, &mut rng) {
            Ok(Verdict::Continue) => {}
            Ok(Verdict::Agreement(v)) => {
                status = Status::Success;
                agreed = Some(v);
                break;
            }
            Ok(Verdict::Failure) => {
                status = Status::Failure;
                break;
            }
            Err(e) => {
                warn!("negotiation {} aborted in round {rounds}: {e}", scenario.case_id);
                error = Some(e.to_string());
                break;
            }
        }
        lp.ctx.round += 1;
        lp.ctx.phase = determine_phase(lp.ctx.round);
    }

    let outcome = match agreed {
        Some(a) => Some(outcome_metric(scenario.domain, scenario.negotiator_target, a)?),
        None => None,
    };
    if error.is_none() {
        p.negotiator.finish(&EpisodeOutcome { status, rounds, outcome })?;
    }
    Ok(Transcript {
        turns: lp.turns,
        summary: TranscriptSummary {
            case_id: scenario.case_id.clone(),
            domain: scenario.domain,
            status,
            rounds,
            agreed,
            outcome,
            error,
        },
    })
}

/// Draws a uniformly random seed for a sub-run from a parent generator.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(parent);
    rng.set_stream(index);
    rng.random()
}
