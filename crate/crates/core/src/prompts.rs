//! Prompt templates. The text lives in `prompts/v1/*.txt`; placeholders are
//! written `{name}` and filled by [`render`].

use crate::context::NegotiationContext;
use crate::emotion::{Emotion, Party};
use crate::orchestrator::AgentRecommendation;
use crate::scenarios::{Domain, OpponentStrategy, Scenario};

pub const VERSION: &str = "v1";

macro_rules! template {
    ($name:literal) => {
        include_str!(concat!("../prompts/v1/", $name, ".txt"))
    };
}

pub const EMOTION_RECOGNITION: &str = template!("emotion_recognition");
pub const RECOGNITION_RETRY: &str = template!("emotion_recognition_retry");
pub const VALUE_EXTRACTION: &str = template!("value_extraction");
pub const COHERENCE_ASSESSMENT: &str = template!("coherence_assessment");
pub const COHERENCE_RETRY: &str = template!("coherence_retry");
pub const ORCHESTRATOR_SYSTEM: &str = template!("orchestrator_system");
pub const ORCHESTRATOR: &str = template!("orchestrator");
pub const ORCHESTRATOR_RETRY: &str = template!("orchestrator_retry");
pub const JUDGE: &str = template!("judge");
pub const BEHAVIOR_EVALUATION: &str = template!("behavior_evaluation");
pub const MARKER_PROTOCOL: &str = template!("marker_protocol");
pub const VANILLA_GUIDANCE: &str = template!("vanilla_guidance");

pub fn negotiator_template(domain: Domain) -> &'static str {
    match domain {
        Domain::Debt => template!("negotiator_debt"),
        Domain::Medical => template!("negotiator_medical"),
        Domain::Emergency => template!("negotiator_emergency"),
        Domain::Education => template!("negotiator_education"),
    }
}

pub fn opponent_template(domain: Domain) -> &'static str {
    match domain {
        Domain::Debt => template!("opponent_debt"),
        Domain::Medical => template!("opponent_medical"),
        Domain::Emergency => template!("opponent_emergency"),
        Domain::Education => template!("opponent_education"),
    }
}

pub fn strategy_template(strategy: OpponentStrategy) -> &'static str {
    match strategy {
        OpponentStrategy::Vanilla => template!("strategy_vanilla"),
        OpponentStrategy::Pressuring => template!("strategy_pressuring"),
        OpponentStrategy::Victim => template!("strategy_victim"),
        OpponentStrategy::Threatening => template!("strategy_threatening"),
    }
}

/// Substitutes each `{key}` with its value. Unknown placeholders are left as is.
pub fn render(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = template.trim_end().to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// Whole numbers print without decimals, others with two.
pub fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

fn join_labels(emotions: &[Emotion]) -> String {
    emotions.iter().map(|e| e.label()).collect::<Vec<_>>().join(", ")
}

fn scenario_vars(scenario: &Scenario, target: f64) -> Vec<(&'static str, String)> {
    vec![
        ("case_id", scenario.case_id.clone()),
        ("stake", format_value(scenario.stake)),
        ("target", format_value(target)),
        ("details", scenario.describe()),
    ]
}

/// System prompt for the negotiator. `markers` appends the inline tag protocol.
pub fn negotiator_system(scenario: &Scenario, markers: bool) -> String {
    let mut s = render(negotiator_template(scenario.domain), &scenario_vars(scenario, scenario.negotiator_target));
    if markers {
        s.push_str("\n\n");
        s.push_str(MARKER_PROTOCOL.trim_end());
    }
    s
}

pub fn opponent_system(scenario: &Scenario, strategy: OpponentStrategy, markers: bool) -> String {
    let mut s = render(opponent_template(scenario.domain), &scenario_vars(scenario, scenario.opponent_target));
    s.push_str("\n\n");
    s.push_str(strategy_template(strategy).trim_end());
    if markers {
        s.push_str("\n\n");
        s.push_str(MARKER_PROTOCOL.trim_end());
    }
    s
}

pub fn dialogue_text(history: &[(Party, String)]) -> String {
    history
        .iter()
        .map(|(p, t)| format!("{p}: {t}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn recognition_prompt(message: &str, context: &[(Party, String)]) -> String {
    let context = if context.is_empty() {
        "(start of dialogue)".to_string()
    } else {
        dialogue_text(context)
    };
    render(EMOTION_RECOGNITION, &[("context", context), ("message", message.to_string())])
}

pub fn extraction_prompt(message: &str, domain: Domain) -> String {
    render(
        VALUE_EXTRACTION,
        &[("unit", domain.unit().to_string()), ("message", message.to_string())],
    )
}

pub fn coherence_prompt(ctx: &NegotiationContext, recent: &[Emotion]) -> String {
    let history = if recent.is_empty() {
        "none".to_string()
    } else {
        join_labels(recent)
    };
    render(
        COHERENCE_ASSESSMENT,
        &[
            ("negotiator_emotion", ctx.negotiator_emotion.label().to_string()),
            ("opponent_emotion", ctx.opponent_emotion.label().to_string()),
            ("phase", ctx.phase.label().to_string()),
            ("round", ctx.round.to_string()),
            ("gap", format!("{:.3}", ctx.gap)),
            ("stake", format_value(ctx.stake)),
            ("history", history),
        ],
    )
}

pub fn orchestrator_prompt(ctx: &NegotiationContext, recs: &[AgentRecommendation], union: &[Emotion]) -> String {
    let recommendations = recs
        .iter()
        .map(|r| {
            let top: Vec<String> = r
                .recommended
                .iter()
                .map(|e| format!("{} {:.2}", e.label(), r.confidence.prob(*e)))
                .collect();
            format!("- {} advisor picks {} (confidence: {})", r.agent, r.pick, top.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n");
    render(
        ORCHESTRATOR,
        &[
            ("round", ctx.round.to_string()),
            ("phase", ctx.phase.label().to_string()),
            ("negotiator_emotion", ctx.negotiator_emotion.label().to_string()),
            ("opponent_emotion", ctx.opponent_emotion.label().to_string()),
            ("gap", format!("{:.3}", ctx.gap)),
            ("recommendations", recommendations),
            ("union", join_labels(union)),
        ],
    )
}

pub fn orchestrator_retry(union: &[Emotion]) -> String {
    render(ORCHESTRATOR_RETRY, &[("union", join_labels(union))])
}

pub fn judge_prompt(history: &[(Party, String)], domain: Domain) -> String {
    render(
        JUDGE,
        &[("dialogue", dialogue_text(history)), ("unit", domain.unit().to_string())],
    )
}

pub fn behavior_prompt(selected: Emotion, previous_offer: Option<f64>, message: &str) -> String {
    render(
        BEHAVIOR_EVALUATION,
        &[
            ("selected", selected.label().to_string()),
            ("previous_offer", previous_offer.map_or("none".to_string(), format_value)),
            ("message", message.to_string()),
        ],
    )
}
