//! Psychologically grounded emotion selection.
//!
//! Each candidate emotion is scored on four dimensions: plausibility of the
//! transition from the negotiator's current emotion, appropriateness for the
//! dialogue phase, strategic value against the opponent's emotion, and the
//! quality of the rationale. Scores come from a chat model when one is
//! available, otherwise from fixed tables. The weighted sum is adjusted for
//! diversity against the negotiator's recent emotions and turned into a
//! distribution with a softmax.
//!
//! # Reply grammar
//!
//! A model reply holds one record per line:
//!
//! ```text
//! label: p: a: s: r: rationale
//! ```
//!
//! `label` is an emotion name (any case); `p`, `a`, `s`, `r` are numbers
//! clamped to `[0, 1]`; the rationale is free text and may contain colons.
//! Leading `-`/`*` bullets are ignored. A field that is not a number scores
//! 0.5, emotions without a line score 0.5 on every column, and lines that do
//! not start with a label are skipped.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::context::{NegotiationContext, Phase};
use crate::emotion::{softmax, Emotion, EmotionDistribution, Party, Scores, N_EMOTIONS};
use crate::error::{Error, Result};
use crate::game_theory::{classify_valence, PayoffMatrix, Valence};
use crate::llm::{Caller, ChatBackend, ChatMessage, ChatRequest};
use crate::orchestrator::{AgentId, AgentRecommendation};
use crate::prompts;

/// Value used for anything the model did not score.
pub const DEFAULT_SCORE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRow {
    pub plausibility: f64,
    pub appropriateness: f64,
    pub strategic: f64,
    pub rationale_score: f64,
    pub rationale: String,
}

fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        DEFAULT_SCORE
    } else {
        x.clamp(0.0, 1.0)
    }
}

impl AssessmentRow {
    pub fn new(p: f64, a: f64, s: f64, r: f64, rationale: impl Into<String>) -> Self {
        AssessmentRow {
            plausibility: clamp_unit(p),
            appropriateness: clamp_unit(a),
            strategic: clamp_unit(s),
            rationale_score: clamp_unit(r),
            rationale: rationale.into(),
        }
    }

    pub fn neutral() -> Self {
        AssessmentRow::new(DEFAULT_SCORE, DEFAULT_SCORE, DEFAULT_SCORE, DEFAULT_SCORE, "")
    }

    fn values(&self) -> [f64; 4] {
        [self.plausibility, self.appropriateness, self.strategic, self.rationale_score]
    }
}

/// Seven rows in canonical emotion order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentMatrix {
    rows: Vec<AssessmentRow>,
}

impl AssessmentMatrix {
    pub fn from_rows(rows: [AssessmentRow; N_EMOTIONS]) -> Self {
        AssessmentMatrix { rows: rows.into() }
    }

    pub fn uniform(v: f64) -> Self {
        Self::from_rows(std::array::from_fn(|_| AssessmentRow::new(v, v, v, v, "")))
    }

    pub fn from_columns(p: Scores, a: Scores, s: Scores, r: Scores) -> Self {
        Self::from_rows(std::array::from_fn(|i| AssessmentRow::new(p[i], a[i], s[i], r[i], "")))
    }

    pub fn row(&self, e: Emotion) -> &AssessmentRow {
        &self.rows[e.index()]
    }

    pub fn row_mut(&mut self, e: Emotion) -> &mut AssessmentRow {
        &mut self.rows[e.index()]
    }
}

/// Phase-by-emotion appropriateness scores.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTable {
    cells: [Scores; 4],
}

const PHASE_TABLE_CSV: &str = include_str!("../data/phase_appropriateness.csv");

impl Default for PhaseTable {
    fn default() -> Self {
        PhaseTable::from_csv(PHASE_TABLE_CSV).expect("bundled phase table is valid")
    }
}

impl PhaseTable {
    pub fn get(&self, phase: Phase, e: Emotion) -> f64 {
        self.cells[phase.index()][e.index()]
    }

    /// Header `phase,joy,...,neutral`, then one row per phase.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty()).enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "empty phase table".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let expected: Vec<&str> = std::iter::once("phase").chain(Emotion::ALL.iter().map(|e| e.label())).collect();
        if cols != expected {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header '{}'", expected.join(",")),
            });
        }
        let mut cells = [[f64::NAN; N_EMOTIONS]; 4];
        for (i, line) in lines {
            let err = |reason: String| Error::Parse { line: i + 1, reason };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != N_EMOTIONS + 1 {
                return Err(err(format!("expected {} fields", N_EMOTIONS + 1)));
            }
            let phase = Phase::ALL
                .into_iter()
                .find(|p| p.label() == fields[0])
                .ok_or_else(|| err(format!("unknown phase '{}'", fields[0])))?;
            for (j, f) in fields[1..].iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| err(format!("bad number '{f}'")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(format!("{v} outside [0, 1]")));
                }
                cells[phase.index()][j] = v;
            }
        }
        if cells.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Parse {
                line: 0,
                reason: "phase table must list all four phases".into(),
            });
        }
        Ok(PhaseTable { cells })
    }
}

/// Produces an assessment matrix for a context.
pub trait AssessmentBackend {
    fn assess(&self, ctx: &NegotiationContext, recent: &[Emotion]) -> Result<AssessmentMatrix>;
}

/// Table-driven scoring that needs no model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FallbackAssessor {
    pub payoff: PayoffMatrix,
    pub phases: PhaseTable,
}

/// Emotional inertia: staying put is most plausible, moving within a
/// valence next, crossing valence least. Sadness sits outside both valences.
pub fn transition_plausibility(from: Emotion, to: Emotion) -> f64 {
    if from == to {
        return 1.0;
    }
    match (classify_valence(from), classify_valence(to)) {
        (Valence::Other, _) | (_, Valence::Other) => 0.5,
        (a, b) if a == b => 0.7,
        _ => 0.3,
    }
}

impl FallbackAssessor {
    pub fn matrix(&self, ctx: &NegotiationContext) -> AssessmentMatrix {
        let agent = self.payoff.agent_row(ctx.opponent_emotion);
        let best = agent.iter().copied().fold(0.0, f64::max);
        AssessmentMatrix::from_rows(std::array::from_fn(|i| {
            let e = Emotion::ALL[i];
            let p = transition_plausibility(ctx.negotiator_emotion, e);
            let a = self.phases.get(ctx.phase, e);
            let s = if best > 0.0 { agent[i] / best } else { 0.0 };
            AssessmentRow::new(p, a, s, (p + a) / 2.0, "")
        }))
    }
}

impl AssessmentBackend for FallbackAssessor {
    fn assess(&self, ctx: &NegotiationContext, _recent: &[Emotion]) -> Result<AssessmentMatrix> {
        Ok(self.matrix(ctx))
    }
}

fn parse_score(field: &str) -> f64 {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => v.clamp(0.0, 1.0),
        _ => DEFAULT_SCORE,
    }
}

/// Parses a model reply; returns the matrix and how many rows were read.
pub fn parse_assessment(text: &str) -> (AssessmentMatrix, usize) {
    let mut matrix = AssessmentMatrix::from_rows(std::array::from_fn(|_| AssessmentRow::neutral()));
    let mut found = [false; N_EMOTIONS];
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['-', '*']).trim();
        let fields: Vec<&str> = line.splitn(6, ':').collect();
        if fields.len() < 5 {
            continue;
        }
        let label = fields[0].trim().trim_matches(|c: char| !c.is_ascii_alphabetic());
        let Ok(e) = label.parse::<Emotion>() else {
            continue;
        };
        let rationale = fields.get(5).map_or("", |s| s.trim());
        *matrix.row_mut(e) = AssessmentRow::new(
            parse_score(fields[1]),
            parse_score(fields[2]),
            parse_score(fields[3]),
            parse_score(fields[4]),
            rationale,
        );
        found[e.index()] = true;
    }
    (matrix, found.iter().filter(|f| **f).count())
}

/// Asks a chat model for the matrix; falls back to the tables when two
/// replies in a row contain no readable rows.
pub struct LlmAssessor<'a> {
    pub backend: &'a dyn ChatBackend,
    pub fallback: FallbackAssessor,
}

impl<'a> LlmAssessor<'a> {
    pub fn new(backend: &'a dyn ChatBackend) -> Self {
        LlmAssessor {
            backend,
            fallback: FallbackAssessor::default(),
        }
    }
}

impl AssessmentBackend for LlmAssessor<'_> {
    fn assess(&self, ctx: &NegotiationContext, recent: &[Emotion]) -> Result<AssessmentMatrix> {
        let mut messages = vec![ChatMessage::user(prompts::coherence_prompt(ctx, recent))];
        for attempt in 0..2 {
            let reply = self.backend.chat(&ChatRequest::new(Caller::Assessor, ctx.round, &messages, 0.0))?;
            let (matrix, rows) = parse_assessment(&reply);
            if rows > 0 {
                return Ok(matrix);
            }
            if attempt == 0 {
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user(prompts::COHERENCE_RETRY.trim_end()));
            }
        }
        warn!("assessment reply unreadable after retry; using table scores");
        Ok(self.fallback.matrix(ctx))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    pub temperature: f64,
    /// Plausibility, appropriateness, strategic value, rationale.
    pub weights: [f64; 4],
    /// Multiplier on the phase-emphasized weight.
    pub phase_emphasis: f64,
    /// Gap above which the rationale weight is emphasized.
    pub gap_emphasis_threshold: f64,
    /// Rationale weight used as the base of that emphasis when the configured one is smaller.
    pub gap_rationale_floor: f64,
    pub diversity_decay: f64,
    pub diversity_bonus: f64,
    pub history_window: usize,
    /// Occurrences in the window above which the decay applies.
    pub repeat_limit: usize,
    /// Listed with the agent's settings; not consumed.
    pub coherence_threshold: f64,
    /// Total probability mass reserved evenly across the seven emotions.
    pub min_transition_confidence: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            temperature: 1.0,
            weights: [0.4, 0.3, 0.3, 0.0],
            phase_emphasis: 1.25,
            gap_emphasis_threshold: 0.5,
            gap_rationale_floor: 0.1,
            diversity_decay: 0.6,
            diversity_bonus: 1.3,
            history_window: 5,
            repeat_limit: 2,
            coherence_threshold: 0.6,
            min_transition_confidence: 0.1,
        }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::param("temperature", "must be positive"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::param("weights", "must be non-negative with a positive sum"));
        }
        if !(self.diversity_decay > 0.0 && self.diversity_decay < 1.0) {
            return Err(Error::param("diversity_decay", "must be in (0, 1)"));
        }
        if !(self.diversity_bonus > 1.0 && self.diversity_bonus.is_finite()) {
            return Err(Error::param("diversity_bonus", "must be greater than 1"));
        }
        if !(self.phase_emphasis > 0.0) {
            return Err(Error::param("phase_emphasis", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.min_transition_confidence) {
            return Err(Error::param("min_transition_confidence", "must be in [0, 1)"));
        }
        Ok(())
    }

    /// Dimension weights after phase and gap emphasis, summing to one.
    pub fn effective_weights(&self, phase: Phase, gap: f64) -> [f64; 4] {
        let mut w = self.weights;
        match phase {
            Phase::Opening => w[0] *= self.phase_emphasis,
            Phase::Closing => w[2] *= self.phase_emphasis,
            _ => {}
        }
        if gap > self.gap_emphasis_threshold {
            w[3] = self.phase_emphasis * w[3].max(self.gap_rationale_floor);
        }
        let sum: f64 = w.iter().sum();
        w.map(|x| x / sum)
    }
}

pub fn aggregate(matrix: &AssessmentMatrix, cfg: &CoherenceConfig, ctx: &NegotiationContext) -> Scores {
    let w = cfg.effective_weights(ctx.phase, ctx.gap);
    std::array::from_fn(|i| {
        let v = matrix.rows[i].values();
        (0..4).map(|k| w[k] * v[k]).sum()
    })
}

/// Decays emotions used more than `repeat_limit` times in `window` and
/// boosts ones absent from it.
pub fn apply_diversity(scores: &Scores, window: &[Emotion], cfg: &CoherenceConfig) -> Scores {
    std::array::from_fn(|i| {
        let count = window.iter().filter(|e| e.index() == i).count();
        if count > cfg.repeat_limit {
            scores[i] * cfg.diversity_decay
        } else if count == 0 {
            scores[i] * cfg.diversity_bonus
        } else {
            scores[i]
        }
    })
}

/// Mixes `dist` with the uniform distribution so every entry is at least
/// `total_floor / 7`.
pub fn floor_distribution(dist: &EmotionDistribution, total_floor: f64) -> EmotionDistribution {
    let f = total_floor / N_EMOTIONS as f64;
    let probs = dist.as_array().map(|p| f + (1.0 - total_floor) * p);
    EmotionDistribution::new(probs).expect("mixture of distributions is a distribution")
}

/// Assess, aggregate, diversify, softmax, floor and sample.
pub fn coherence_select<R: Rng + ?Sized>(
    ctx: &NegotiationContext,
    cfg: &CoherenceConfig,
    backend: &dyn AssessmentBackend,
    rng: &mut R,
) -> Result<AgentRecommendation> {
    let window = ctx.history.party_window(Party::Negotiator, cfg.history_window);
    let matrix = backend.assess(ctx, &window)?;
    let scores = apply_diversity(&aggregate(&matrix, cfg, ctx), &window, cfg);
    let dist = floor_distribution(&softmax(&scores, cfg.temperature)?, cfg.min_transition_confidence);
    let pick = dist.sample(rng);
    Ok(AgentRecommendation::new(AgentId::Coherence, dist, pick))
}
