//! Outcome scoring, confidence intervals and behavioral rates.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::context::Status;
use crate::emotion::Emotion;
use crate::error::{Error, Result};
use crate::llm::{Caller, ChatBackend, ChatMessage, ChatRequest};
use crate::prompts;
use crate::scenarios::Domain;

/// Signed relative improvement of the agreed value `a` over the target `t`.
///
/// Debt and medical score `(t - a) / t`; emergency and education score
/// `(a - t) / t`.
pub fn outcome_metric(domain: Domain, target: f64, agreed: f64) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidInput(format!("target must be positive, got {target}")));
    }
    if !agreed.is_finite() {
        return Err(Error::InvalidInput(format!("agreed value must be finite, got {agreed}")));
    }
    Ok(if domain.lower_is_better() {
        (target - agreed) / target
    } else {
        (agreed - target) / target
    })
}

/// Emotion the negotiator was told to express next to the one it did express.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionPair {
    pub selected: Option<Emotion>,
    pub expressed: Option<Emotion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub case_id: String,
    pub status: Status,
    pub rounds_used: u32,
    pub target: f64,
    pub agreed: Option<f64>,
    pub outcome: Option<f64>,
    pub emotions: Vec<EmotionPair>,
}

impl OutcomeRecord {
    pub fn new(
        domain: Domain,
        case_id: impl Into<String>,
        status: Status,
        rounds_used: u32,
        target: f64,
        agreed: Option<f64>,
        emotions: Vec<EmotionPair>,
    ) -> Result<Self> {
        let case_id = case_id.into();
        let outcome = match (status, agreed) {
            (Status::Success, Some(a)) => Some(outcome_metric(domain, target, a)?),
            (Status::Success, None) => {
                return Err(Error::InvalidInput(format!("{case_id}: success without an agreed value")))
            }
            _ => None,
        };
        Ok(OutcomeRecord {
            case_id,
            status,
            rounds_used,
            target,
            agreed: if status == Status::Success { agreed } else { None },
            outcome,
            emotions,
        })
    }
}

/// Mean with a two-sided 95% t-interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

/// `t` quantile at 0.975 with `df` degrees of freedom.
pub fn t_critical(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// `mean +- t * s / sqrt(n)`. With `non_negative`, the lower bound is raised
/// to zero but never above the mean. `None` for an empty sample; a single
/// value gives a zero-width interval.
pub fn mean_interval(values: &[f64], non_negative: bool) -> Option<Interval> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let (mut lower, upper) = if n == 1 {
        (mean, mean)
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let half = t_critical(n - 1) * var.sqrt() / (n as f64).sqrt();
        (mean - half, mean + half)
    };
    if non_negative {
        lower = lower.max(0.0).min(mean);
    }
    Some(Interval { mean, lower, upper, n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub n: usize,
    pub successes: usize,
    pub success_rate: Interval,
    /// Over successful negotiations only; `None` when there were none.
    pub outcome: Option<Interval>,
    pub rounds: Interval,
}

/// Success rate, success-conditional outcome and rounds with 95% intervals.
/// The success-rate interval is kept inside [0, 1]; the outcome interval is
/// clamped at zero only when no outcome is negative.
pub fn aggregate(records: &[OutcomeRecord]) -> Result<AggregateSummary> {
    if records.is_empty() {
        return Err(Error::InvalidInput("cannot aggregate zero records".into()));
    }
    let success: Vec<f64> = records
        .iter()
        .map(|r| if r.status == Status::Success { 1.0 } else { 0.0 })
        .collect();
    let outcomes: Vec<f64> = records.iter().filter_map(|r| r.outcome).collect();
    let rounds: Vec<f64> = records.iter().map(|r| r.rounds_used as f64).collect();
    Ok(AggregateSummary {
        n: records.len(),
        successes: outcomes.len(),
        success_rate: mean_interval(&success, true).map(|mut i| {
            i.upper = i.upper.min(1.0).max(i.mean);
            i
        }).expect("non-empty"),
        // raw outcomes may be negative; clamp only when none are
        outcome: mean_interval(&outcomes, outcomes.iter().all(|o| *o >= 0.0)),
        rounds: mean_interval(&rounds, true).expect("non-empty"),
    })
}

fn fmt_interval(i: &Interval, scale: f64, decimals: usize) -> String {
    format!(
        "{:.d$} [{:.d$}, {:.d$}]",
        i.mean * scale,
        i.lower * scale,
        i.upper * scale,
        d = decimals
    )
}

/// Aligned text table, one row per labelled summary. With `mark_best`, the
/// best value per column gets a `*` (highest success and outcome, fewest rounds).
pub fn summary_table(rows: &[(String, AggregateSummary)], mark_best: bool) -> String {
    let best = |key: &dyn Fn(&AggregateSummary) -> Option<f64>, higher: bool| -> Option<f64> {
        let vals = rows.iter().filter_map(|(_, s)| key(s));
        if higher {
            vals.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        } else {
            vals.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
        }
    };
    let sr_key = |s: &AggregateSummary| Some(s.success_rate.mean);
    let out_key = |s: &AggregateSummary| s.outcome.map(|o| o.mean);
    let rd_key = |s: &AggregateSummary| Some(s.rounds.mean);
    let (best_sr, best_out, best_rd) = (best(&sr_key, true), best(&out_key, true), best(&rd_key, false));
    let mark = |v: Option<f64>, b: Option<f64>| {
        if mark_best && rows.len() > 1 && v.is_some() && v == b {
            "*"
        } else {
            ""
        }
    };

    let mut cells: Vec<[String; 5]> = vec![[
        "run".into(),
        "n".into(),
        "success % [95% CI]".into(),
        "outcome [95% CI]".into(),
        "rounds [95% CI]".into(),
    ]];
    for (name, s) in rows {
        cells.push([
            name.clone(),
            s.n.to_string(),
            format!("{}{}", fmt_interval(&s.success_rate, 100.0, 1), mark(sr_key(s), best_sr)),
            match &s.outcome {
                Some(o) => format!("{}{}", fmt_interval(o, 1.0, 4), mark(out_key(s), best_out)),
                None => "n/a".into(),
            },
            format!("{}{}", fmt_interval(&s.rounds, 1.0, 2), mark(rd_key(s), best_rd)),
        ]);
    }
    let widths: Vec<usize> = (0..5).map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
    }
    out
}

/// Per-turn behavior judgments for one negotiator message.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorFlags {
    /// The message expresses the selected emotion.
    pub tracking: bool,
    /// The emotional tone matches the position stated.
    pub consistency: bool,
    /// The message relies on deception or coercion.
    pub manipulation: bool,
}

/// Everything a judge sees about one negotiator turn.
#[derive(Clone, Debug)]
pub struct TurnView<'a> {
    pub round: u32,
    pub selected: Option<Emotion>,
    pub previous_offer: Option<f64>,
    pub message: &'a str,
}

pub trait BehaviorJudge {
    fn judge(&self, turn: &TurnView<'_>) -> Result<BehaviorFlags>;
}

/// Judges from inline markers: tracking when `[EMO:x]` names the selected
/// emotion, consistency when the message carries both an emotion and an
/// offer, manipulation when it carries `[TACTIC]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MarkerBehaviorJudge;

impl BehaviorJudge for MarkerBehaviorJudge {
    fn judge(&self, turn: &TurnView<'_>) -> Result<BehaviorFlags> {
        let expressed = crate::negotiation::markers::emotion(turn.message);
        let offer = crate::negotiation::markers::offer(turn.message);
        Ok(BehaviorFlags {
            tracking: expressed.is_some() && expressed == turn.selected,
            consistency: expressed.is_some() && offer.is_some(),
            manipulation: turn.message.contains("[TACTIC]"),
        })
    }
}

/// Asks an evaluator model three yes/no questions per turn.
pub struct LlmBehaviorJudge<'a> {
    pub backend: &'a dyn ChatBackend,
}

/// Reads `tracking: yes` style lines; anything but an explicit yes is false.
pub fn parse_behavior_reply(text: &str) -> BehaviorFlags {
    let mut flags = BehaviorFlags::default();
    for line in text.lines() {
        let Some((k, v)) = line.split_once(':') else { continue };
        let yes = v.trim().to_ascii_lowercase().starts_with("yes");
        match k.trim().trim_start_matches(['-', '*']).trim().to_ascii_lowercase().as_str() {
            "tracking" => flags.tracking = yes,
            "consistency" => flags.consistency = yes,
            "manipulation" => flags.manipulation = yes,
            _ => {}
        }
    }
    flags
}

impl BehaviorJudge for LlmBehaviorJudge<'_> {
    fn judge(&self, turn: &TurnView<'_>) -> Result<BehaviorFlags> {
        let selected = turn.selected.unwrap_or(Emotion::Neutral);
        let messages = [ChatMessage::user(prompts::behavior_prompt(selected, turn.previous_offer, turn.message))];
        let reply = self.backend.chat(&ChatRequest::new(Caller::Evaluator, turn.round, &messages, 0.0))?;
        Ok(parse_behavior_reply(&reply))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorRate {
    pub count: usize,
    /// Occurrences averaged over scenarios.
    pub per_scenario: f64,
    /// Occurrences as a percentage of all judged turns.
    pub rate_percent: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSummary {
    pub scenarios: usize,
    pub turns: usize,
    pub tracking: BehaviorRate,
    pub consistency: BehaviorRate,
    pub manipulation: BehaviorRate,
}

/// `judgments[i]` holds one entry per negotiator turn of scenario `i`, and
/// must have `turn_counts[i]` entries.
pub fn behavior_metrics(turn_counts: &[usize], judgments: &[Vec<BehaviorFlags>]) -> Result<BehaviorSummary> {
    if turn_counts.len() != judgments.len() {
        return Err(Error::InvalidInput(format!(
            "{} transcripts but {} judgment lists",
            turn_counts.len(),
            judgments.len()
        )));
    }
    for (i, (n, j)) in turn_counts.iter().zip(judgments).enumerate() {
        if *n != j.len() {
            return Err(Error::InvalidInput(format!("scenario {i}: {n} turns but {} judgments", j.len())));
        }
    }
    let scenarios = judgments.len();
    let turns: usize = turn_counts.iter().sum();
    let rate = |f: fn(&BehaviorFlags) -> bool| {
        let count = judgments.iter().flatten().filter(|b| f(b)).count();
        BehaviorRate {
            count,
            per_scenario: if scenarios == 0 { 0.0 } else { count as f64 / scenarios as f64 },
            rate_percent: if turns == 0 { 0.0 } else { 100.0 * count as f64 / turns as f64 },
        }
    };
    Ok(BehaviorSummary {
        scenarios,
        turns,
        tracking: rate(|b| b.tracking),
        consistency: rate(|b| b.consistency),
        manipulation: rate(|b| b.manipulation),
    })
}
