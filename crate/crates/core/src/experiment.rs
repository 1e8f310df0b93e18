//! Batch experiments: configuration, the named hyperparameter registry,
//! the runner that writes a run directory, and run comparison.
//!
//! A run directory holds:
//!
//! | file | contents |
//! |---|---|
//! | `config.json` | resolved configuration, hyperparameters included |
//! | `scenarios.jsonl` | the scenarios negotiated, in order |
//! | `transcripts.jsonl` | every turn, each negotiation closed by a summary record |
//! | `outcomes.jsonl` | one outcome record per negotiation |
//! | `weights.csv` | orchestrator weights per turn and after each negotiation |
//! | `summary.json` / `summary.txt` | aggregate with 95% intervals |
//! | `qtable.txt` | final Q-table, for policies that learn one |
//!
//! Every file is a pure function of the configuration, so two runs with the
//! same seed and scripted backends are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::coherence::CoherenceConfig;
use crate::error::{Error, Result};
use crate::game_theory::{GameTheoryAgent, WslsConfig};
use crate::llm::{build_backend, BackendConfig, BackendKind, ChatBackend, TemperatureConfig};
use crate::metrics::{
    aggregate, behavior_metrics, summary_table, AggregateSummary, BehaviorFlags, BehaviorJudge, BehaviorSummary,
    LlmBehaviorJudge, MarkerBehaviorJudge, OutcomeRecord, TurnView,
};
use crate::negotiation::{
    derive_seed, run_negotiation, CoherencePolicy, EmotionPolicy, Experts, Fuser, GameTheoryPolicy, GapJudge, Judge,
    LlmJudge, LlmVoice, MarkerJudge, OrchestratedPolicy, Participants, PolicyKind, PromptGuidedPolicy,
    QLearningPolicy, ScriptedNegotiator, ScriptedOpponent, Transcript, VanillaPolicy, Voice, DEFAULT_MAX_ROUNDS,
};
use crate::orchestrator::{CosineSchedule, ReliabilityConfig, ReliabilityWeights};
use crate::emotion::Party;
use crate::rl::{QLearningAgent, QParams, QTable};
use crate::scenarios::{generate_synthetic, load_scenarios, Domain, OpponentStrategy, ScenarioSet};

/// Every tunable constant, grouped by component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub orchestrator: ReliabilityConfig,
    pub game_theory: WslsConfig,
    pub rl: QParams,
    pub coherence: CoherenceConfig,
    pub temperature: TemperatureConfig,
    /// Relative gap at which the gap judge declares agreement.
    pub judge_gap_threshold: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            orchestrator: ReliabilityConfig::default(),
            game_theory: WslsConfig::default(),
            rl: QParams::default(),
            coherence: CoherenceConfig::default(),
            temperature: TemperatureConfig::default(),
            judge_gap_threshold: 0.05,
        }
    }
}

/// One named, range-checked hyperparameter.
pub struct Hyperparameter {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
    pub doc: &'static str,
    get: fn(&Hyperparameters) -> f64,
    set: fn(&mut Hyperparameters, f64),
}

impl Hyperparameter {
    pub fn get(&self, h: &Hyperparameters) -> f64 {
        (self.get)(h)
    }

    /// Checks the range and integrality, then stores the value.
    pub fn set(&self, h: &mut Hyperparameters, value: f64) -> Result<()> {
        if !value.is_finite() || value < self.min || value > self.max {
            return Err(Error::Usage(format!(
                "{} must be in [{}, {}], got {value}",
                self.name, self.min, self.max
            )));
        }
        if self.integer && value.fract() != 0.0 {
            return Err(Error::Usage(format!("{} must be an integer, got {value}", self.name)));
        }
        (self.set)(h, value);
        Ok(())
    }
}

macro_rules! hp {
    ($name:literal, $default:expr, [$min:expr, $max:expr], $doc:literal, $($field:ident).+) => {
        Hyperparameter {
            name: $name,
            default: $default,
            min: $min,
            max: $max,
            integer: false,
            doc: $doc,
            get: |h| h.$($field).+,
            set: |h, v| h.$($field).+ = v,
        }
    };
    ($name:literal, $default:expr, [$min:expr, $max:expr], $doc:literal, $($field:ident).+ as $t:ty) => {
        Hyperparameter {
            name: $name,
            default: $default as f64,
            min: $min,
            max: $max,
            integer: true,
            doc: $doc,
            get: |h| h.$($field).+ as f64,
            set: |h, v| h.$($field).+ = v as $t,
        }
    };
    ($name:literal, $default:expr, [$min:expr, $max:expr], $doc:literal, |$h:ident| $get:expr, |$hs:ident, $v:ident| $set:expr) => {
        Hyperparameter {
            name: $name,
            default: $default,
            min: $min,
            max: $max,
            integer: false,
            doc: $doc,
            get: |$h| $get,
            set: |$hs, $v| $set,
        }
    };
}

fn cosine(h: &mut Hyperparameters) -> &mut CosineSchedule {
    let eta = h.orchestrator.eta;
    h.orchestrator.cosine.get_or_insert(CosineSchedule {
        eta_min: 0.0,
        eta_max: eta,
        period: 1000.0,
    })
}

static REGISTRY: [Hyperparameter; 37] = [
    hp!("orchestrator.exploration_initial", 0.3, [0.0, 1.0], "initial exploration rate", orchestrator.exploration.initial),
    hp!("orchestrator.exploration_decay", 0.99, [0.95, 0.999], "per-round exploration decay", orchestrator.exploration.decay),
    hp!("orchestrator.dirichlet_alpha", 2.0, [0.01, 1000.0], "Dirichlet prior concentration for reliability", orchestrator.dirichlet_alpha),
    hp!("orchestrator.discount", 0.9, [0.0, 1.0], "discount factor (recorded, not consumed)", orchestrator.discount),
    hp!("orchestrator.replay_buffer", 100, [1.0, 1e9], "experience buffer size (recorded, not consumed)", orchestrator.replay_buffer as usize),
    hp!("orchestrator.eta", 0.1, [1e-6, 1.0], "micro update learning rate", orchestrator.eta),
    hp!("orchestrator.kappa", 0.2, [1e-6, 1.0], "macro update step size", orchestrator.kappa),
    hp!(
        "orchestrator.cosine_period",
        0.0,
        [0.0, 1e9],
        "cosine annealing period in micro updates; 0 keeps eta constant",
        |h| h.orchestrator.cosine.map_or(0.0, |c| c.period),
        |h, v| if v == 0.0 { h.orchestrator.cosine = None } else { cosine(h).period = v }
    ),
    hp!(
        "orchestrator.cosine_eta_min",
        0.0,
        [0.0, 1.0],
        "cosine annealing floor; setting it enables annealing",
        |h| h.orchestrator.cosine.map_or(0.0, |c| c.eta_min),
        |h, v| cosine(h).eta_min = v
    ),
    hp!(
        "orchestrator.cosine_eta_max",
        0.1,
        [1e-6, 1.0],
        "cosine annealing ceiling; setting it enables annealing",
        |h| h.orchestrator.cosine.map_or(h.orchestrator.eta, |c| c.eta_max),
        |h, v| cosine(h).eta_max = v
    ),
    hp!("game_theory.win_threshold", 2.0, [0.0, 4.0], "agent payoff below which WSLS shifts", game_theory.win_threshold),
    hp!("game_theory.favoritism", 1.3, [1.0, 10.0], "multiplier on positive replies to positive clients", game_theory.favoritism),
    hp!("game_theory.negativity_threshold", 2, [0.0, 7.0], "negativity threshold (recorded, not consumed)", game_theory.negativity_threshold as u32),
    hp!("game_theory.confidence_temperature", 1.0, [1e-3, 100.0], "softmax temperature over payoffs", game_theory.confidence_temperature),
    hp!("rl.learning_rate", 0.1, [1e-6, 1.0], "Q-learning step size", rl.learning_rate),
    hp!("rl.discount", 0.9, [0.0, 1.0], "Q-learning discount", rl.discount),
    hp!("rl.temperature", 0.1, [1e-3, 100.0], "softmax temperature over Q-values", rl.temperature),
    hp!("rl.init_std", 0.01, [0.0, 10.0], "standard deviation of initial Q-values", rl.init_std),
    hp!("rl.feature_dim", 10, [1.0, 1e6], "feature vector size (recorded, not consumed)", rl.feature_dim as usize),
    hp!("coherence.threshold", 0.6, [0.0, 1.0], "coherence threshold (recorded, not consumed)", coherence.coherence_threshold),
    hp!("coherence.min_transition_confidence", 0.1, [0.0, 0.99], "probability mass spread evenly as a floor", coherence.min_transition_confidence),
    hp!("coherence.w_plausibility", 0.4, [0.0, 1.0], "plausibility weight", |h| h.coherence.weights[0], |h, v| h.coherence.weights[0] = v),
    hp!("coherence.w_appropriateness", 0.3, [0.0, 1.0], "appropriateness weight", |h| h.coherence.weights[1], |h, v| h.coherence.weights[1] = v),
    hp!("coherence.w_strategic", 0.3, [0.0, 1.0], "strategic value weight", |h| h.coherence.weights[2], |h, v| h.coherence.weights[2] = v),
    hp!("coherence.w_rationale", 0.0, [0.0, 1.0], "rationale weight", |h| h.coherence.weights[3], |h, v| h.coherence.weights[3] = v),
    hp!("coherence.temperature", 1.0, [1e-3, 100.0], "softmax temperature over scores", coherence.temperature),
    hp!("coherence.phase_emphasis", 1.25, [1e-3, 10.0], "multiplier on the phase-emphasized weight", coherence.phase_emphasis),
    hp!("coherence.gap_threshold", 0.5, [0.0, 100.0], "gap above which rationale is emphasized", coherence.gap_emphasis_threshold),
    hp!("coherence.diversity_decay", 0.6, [0.01, 0.99], "multiplier on overused emotions", coherence.diversity_decay),
    hp!("coherence.diversity_bonus", 1.3, [1.01, 10.0], "multiplier on unused emotions", coherence.diversity_bonus),
    hp!("coherence.history_window", 5, [1.0, 1000.0], "turns inspected for diversity", coherence.history_window as usize),
    hp!("temperature.base", 0.7, [0.0, 2.0], "base response temperature", temperature.base),
    hp!("temperature.high_confidence", 0.5, [0.0, 10.0], "multiplier at high confidence", temperature.high_confidence),
    hp!("temperature.low_confidence", 1.5, [0.0, 10.0], "multiplier at low confidence", temperature.low_confidence),
    hp!("temperature.crisis", 0.7, [0.0, 10.0], "multiplier in the closing phase", temperature.crisis),
    hp!("temperature.early", 1.2, [0.0, 10.0], "multiplier in the opening phase", temperature.early),
    hp!("judge.gap_threshold", 0.05, [0.0, 10.0], "relative gap at which the gap judge agrees", judge_gap_threshold),
];

pub fn registry() -> &'static [Hyperparameter] {
    &REGISTRY
}

pub fn lookup_hyperparameter(name: &str) -> Result<&'static Hyperparameter> {
    REGISTRY.iter().find(|h| h.name == name).ok_or_else(|| {
        Error::Usage(format!(
            "unknown hyperparameter '{name}'; `emomas hyperparameters` lists valid names"
        ))
    })
}

/// Parses `key=value`.
pub fn parse_override(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override '{s}' is not of the form key=value")))?;
    let k = k.trim();
    lookup_hyperparameter(k)?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("override {k}: '{}' is not a number", v.trim())))?;
    Ok((k.to_string(), v))
}

impl Hyperparameters {
    pub fn with_overrides(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut h = Hyperparameters::default();
        // cosine_period last so that enabling annealing picks up eta overrides
        let mut ordered: Vec<(&String, &f64)> = overrides.iter().collect();
        ordered.sort_by_key(|(k, _)| k.as_str() == "orchestrator.cosine_period");
        for (k, v) in ordered {
            lookup_hyperparameter(k)?.set(&mut h, *v)?;
        }
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        self.rl.validate()?;
        self.coherence.validate()?;
        Ok(())
    }

    /// Text listing of every hyperparameter with its current value and range.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for h in registry() {
            writeln!(out, "{:<40} {:>10}  [{}, {}]  {}", h.name, h.get(self), h.min, h.max, h.doc).unwrap();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    File(PathBuf),
    Generate(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeKind {
    /// `[ACCEPT:v]` / `[REJECT]` markers.
    Marker,
    /// Agreement once offers are close enough.
    Gap,
    /// A chat model reads the dialogue.
    Llm,
}

impl std::str::FromStr for JudgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "marker" => Ok(JudgeKind::Marker),
            "gap" => Ok(JudgeKind::Gap),
            "llm" => Ok(JudgeKind::Llm),
            _ => Err(Error::Usage(format!("unknown judge '{s}' (expected one of: marker, gap, llm)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub negotiator: PolicyKind,
    pub opponent_strategy: OpponentStrategy,
    /// Negotiator voice, emotion recognition, value extraction, coherence
    /// assessment and the LLM orchestrator.
    pub negotiator_backend: BackendConfig,
    pub opponent_backend: BackendConfig,
    /// Judge and behavior evaluator.
    pub judge_backend: BackendConfig,
    /// Defaults to the LLM judge for a remote judge backend, the marker
    /// judge when the opponent is scripted, and the gap judge otherwise.
    pub judge: Option<JudgeKind>,
    pub scenarios: ScenarioSource,
    /// Upper bound on scenarios taken from a file.
    pub limit: Option<usize>,
    pub seed: u64,
    pub max_rounds: u32,
    pub overrides: BTreeMap<String, f64>,
    pub resume_qtable: Option<PathBuf>,
    pub evaluate_behavior: bool,
    /// Worker threads for policies without learning state.
    pub jobs: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Scripted backends everywhere, 20 generated scenarios.
    pub fn scripted(domain: Domain, negotiator: PolicyKind, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            domain,
            negotiator,
            opponent_strategy: OpponentStrategy::Vanilla,
            negotiator_backend: BackendConfig::scripted(),
            opponent_backend: BackendConfig::scripted(),
            judge_backend: BackendConfig::scripted(),
            judge: None,
            scenarios: ScenarioSource::Generate(20),
            limit: None,
            seed: 42,
            max_rounds: DEFAULT_MAX_ROUNDS,
            overrides: BTreeMap::new(),
            resume_qtable: None,
            evaluate_behavior: true,
            jobs: 1,
            out: out.into(),
        }
    }

    pub fn judge_kind(&self) -> JudgeKind {
        self.judge.unwrap_or(if self.judge_backend.kind == BackendKind::Remote {
            JudgeKind::Llm
        } else if self.opponent_backend.kind == BackendKind::Scripted {
            JudgeKind::Marker
        } else {
            JudgeKind::Gap
        })
    }

    pub fn validate(&self) -> Result<Hyperparameters> {
        if let ScenarioSource::Generate(0) = self.scenarios {
            return Err(Error::Usage("the number of scenarios must be at least 1".into()));
        }
        if self.limit == Some(0) {
            return Err(Error::Usage("the number of scenarios must be at least 1".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Usage("max rounds must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Usage("jobs must be at least 1".into()));
        }
        if self.judge_kind() == JudgeKind::Llm && self.judge_backend.kind == BackendKind::Scripted {
            return Err(Error::Usage("the llm judge needs a remote judge backend".into()));
        }
        for b in [&self.negotiator_backend, &self.opponent_backend, &self.judge_backend] {
            b.validate()?;
        }
        Hyperparameters::with_overrides(&self.overrides)
    }

    pub fn load_scenarios(&self) -> Result<ScenarioSet> {
        let mut set = match &self.scenarios {
            ScenarioSource::File(p) => load_scenarios(p, self.domain)?,
            ScenarioSource::Generate(n) => generate_synthetic(self.domain, *n, self.seed)?,
        };
        if set.is_empty() {
            return Err(Error::Usage("the scenario file holds no scenarios".into()));
        }
        if let Some(n) = self.limit {
            set.truncate(n);
        }
        Ok(set)
    }
}

/// Machine-readable run summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub domain: Domain,
    pub negotiator: PolicyKind,
    pub opponent_strategy: OpponentStrategy,
    pub seed: u64,
    pub aggregate: AggregateSummary,
    pub behavior: Option<BehaviorSummary>,
    pub final_weights: Option<[f64; 3]>,
    /// Set when a backend failure stopped the run early.
    pub aborted: Option<String>,
}

pub struct ExperimentReport {
    pub summary: RunSummary,
    pub transcripts: Vec<Transcript>,
    pub records: Vec<OutcomeRecord>,
}

struct Backends {
    negotiator: Arc<dyn ChatBackend>,
    opponent: Arc<dyn ChatBackend>,
    judge: Arc<dyn ChatBackend>,
}

impl Backends {
    fn build(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Backends {
            negotiator: Arc::from(build_backend(&cfg.negotiator_backend)?),
            opponent: Arc::from(build_backend(&cfg.opponent_backend)?),
            judge: Arc::from(build_backend(&cfg.judge_backend)?),
        })
    }
}

fn initial_qtable(cfg: &ExperimentConfig, h: &Hyperparameters) -> Result<QTable> {
    match &cfg.resume_qtable {
        Some(p) => QTable::load(p),
        None => QTable::new(h.rl.clone(), derive_seed(cfg.seed, u64::MAX)),
    }
}

fn build_policy(cfg: &ExperimentConfig, h: &Hyperparameters, b: &Backends) -> Result<Box<dyn EmotionPolicy + Send>> {
    let gt = GameTheoryAgent::new(h.game_theory.clone());
    let assessor = Some(b.negotiator.clone());
    Ok(match cfg.negotiator {
        PolicyKind::Vanilla => Box::new(VanillaPolicy),
        PolicyKind::PromptGuided => Box::new(PromptGuidedPolicy),
        PolicyKind::GameTheory => Box::new(GameTheoryPolicy::new(gt)),
        PolicyKind::QLearning => Box::new(QLearningPolicy {
            agent: QLearningAgent::new(initial_qtable(cfg, h)?),
        }),
        PolicyKind::Coherence => Box::new(CoherencePolicy {
            config: h.coherence.clone(),
            backend: assessor,
        }),
        PolicyKind::EmoMasBayes | PolicyKind::EmoMasLlm => {
            let mut rl = QLearningAgent::new(initial_qtable(cfg, h)?);
            rl.exploration = Some(h.orchestrator.exploration);
            let experts = Experts::new(gt, rl, h.coherence.clone(), assessor);
            let fuser = if cfg.negotiator == PolicyKind::EmoMasBayes {
                Fuser::Bayes
            } else {
                Fuser::Llm(b.negotiator.clone())
            };
            Box::new(OrchestratedPolicy::new(experts, ReliabilityWeights::new(h.orchestrator.clone()), fuser))
        }
    })
}

fn build_voice(party: Party, backend: &Arc<dyn ChatBackend>, strategy: OpponentStrategy, h: &Hyperparameters) -> Box<dyn Voice + Send> {
    if backend.is_scripted() {
        return match party {
            Party::Negotiator => Box::new(ScriptedNegotiator::default()),
            Party::Opponent => Box::new(ScriptedOpponent::new(strategy)),
        };
    }
    let mut v = LlmVoice::new(backend.clone(), party, strategy);
    v.temperatures = h.temperature.clone();
    Box::new(v)
}

fn build_judge(cfg: &ExperimentConfig, h: &Hyperparameters, b: &Backends) -> Box<dyn Judge + Send + Sync> {
    match cfg.judge_kind() {
        JudgeKind::Marker => Box::new(MarkerJudge),
        JudgeKind::Gap => Box::new(GapJudge {
            threshold: h.judge_gap_threshold,
        }),
        JudgeKind::Llm => Box::new(LlmJudge {
            backend: b.judge.clone(),
        }),
    }
}

fn negotiate(
    cfg: &ExperimentConfig,
    h: &Hyperparameters,
    b: &Backends,
    policy: &mut dyn EmotionPolicy,
    judge: &dyn Judge,
    set: &ScenarioSet,
    index: usize,
) -> Result<Transcript> {
    let scenario = &set.scenarios[index];
    let mut nv = build_voice(Party::Negotiator, &b.negotiator, cfg.opponent_strategy, h);
    let mut ov = build_voice(Party::Opponent, &b.opponent, cfg.opponent_strategy, h);
    let mut p = Participants {
        negotiator: policy,
        negotiator_voice: nv.as_mut(),
        opponent_voice: ov.as_mut(),
        judge,
        perception: b.negotiator.as_ref(),
    };
    let t = run_negotiation(scenario, &mut p, cfg.max_rounds, derive_seed(cfg.seed, index as u64))?;
    info!(
        "{} [{}/{}]: {} after {} rounds",
        scenario.case_id,
        index + 1,
        set.len(),
        t.summary.status,
        t.summary.rounds
    );
    Ok(t)
}

/// Runs a policy without learning state over every scenario, spread over
/// `jobs` threads. Results are identical to a sequential run. Only the
/// negotiations before the first backend failure are kept.
fn run_parallel(cfg: &ExperimentConfig, h: &Hyperparameters, b: &Backends, set: &ScenarioSet) -> Result<Vec<Transcript>> {
    let judge = build_judge(cfg, h, b);

    let n = set.len();
    let jobs = cfg.jobs.min(n);
    let judge = judge.as_ref();
    let mut slots: Vec<Option<Result<Transcript>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                scope.spawn(move || {
                    let mut done = Vec::new();
                    let mut policy = match build_policy(cfg, h, b) {
                        Ok(p) => p,
                        Err(e) => return vec![(w, Err(e))],
                    };
                    for i in (w..n).step_by(jobs) {
                        done.push((i, negotiate(cfg, h, b, policy.as_mut(), judge, set, i)));
                    }
                    done
                })
            })
            .collect();
        for handle in handles {
            for (i, r) in handle.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    let mut out = Vec::new();
    for slot in slots {
        let t = slot.expect("every scenario assigned")?;
        let failed = t.summary.error.is_some();
        out.push(t);
        if failed {
            break;
        }
    }
    Ok(out)
}

fn behavior(cfg: &ExperimentConfig, b: &Backends, transcripts: &[Transcript]) -> Result<BehaviorSummary> {
    let marker = MarkerBehaviorJudge;
    let llm = LlmBehaviorJudge { backend: b.judge.as_ref() };
    let judge: &dyn BehaviorJudge = if cfg.judge_backend.kind == BackendKind::Remote { &llm } else { &marker };
    let mut counts = Vec::new();
    let mut judgments = Vec::new();
    for t in transcripts {
        let mut flags: Vec<BehaviorFlags> = Vec::new();
        let mut previous_offer = None;
        for turn in t.negotiator_turns() {
            flags.push(judge.judge(&TurnView {
                round: turn.round,
                selected: turn.selected,
                previous_offer,
                message: &turn.text,
            })?);
            previous_offer = turn.offer.or(previous_offer);
        }
        counts.push(flags.len());
        judgments.push(flags);
    }
    behavior_metrics(&counts, &judgments)
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

fn weights_csv(transcripts: &[Transcript], finals: &[[f64; 3]]) -> String {
    let mut out = String::from("negotiation,case_id,stage,round,game_theory,q_learning,coherence\n");
    for (i, t) in transcripts.iter().enumerate() {
        for turn in t.negotiator_turns() {
            if let Some(w) = turn.weights {
                writeln!(out, "{},{},turn,{},{},{},{}", i + 1, t.summary.case_id, turn.round, w[0], w[1], w[2]).unwrap();
            }
        }
        if let Some(w) = finals.get(i) {
            writeln!(out, "{},{},final,{},{},{},{}", i + 1, t.summary.case_id, t.summary.rounds, w[0], w[1], w[2]).unwrap();
        }
    }
    out
}

/// Runs a full experiment and writes its run directory. A backend failure
/// stops the run; the artifacts of finished negotiations are still written
/// and [`RunSummary::aborted`] says why.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let h = cfg.validate()?;
    let set = cfg.load_scenarios()?;
    let backends = Backends::build(cfg)?;
    fs::create_dir_all(&cfg.out)?;

    // Learning policies share one policy object across negotiations and run
    // in scenario order.
    let (transcripts, policy, finals) = if cfg.negotiator.learns() || cfg.jobs == 1 {
        let judge = build_judge(cfg, &h, &backends);
        let mut policy = build_policy(cfg, &h, &backends)?;
        let mut transcripts = Vec::new();
        let mut finals = Vec::new();
        for i in 0..set.len() {
            let t = negotiate(cfg, &h, &backends, policy.as_mut(), judge.as_ref(), &set, i)?;
            if let Some(w) = policy.reliability() {
                finals.push(w.weights());
            }
            let failed = t.summary.error.is_some();
            transcripts.push(t);
            if failed {
                break;
            }
        }
        (transcripts, Some(policy), finals)
    } else {
        (run_parallel(cfg, &h, &backends, &set)?, None, Vec::new())
    };

    let mut records = Vec::new();
    for (t, s) in transcripts.iter().zip(&set.scenarios) {
        records.push(t.outcome_record(s.negotiator_target)?);
    }
    let aborted = transcripts.iter().find_map(|t| t.summary.error.clone());
    if let Some(e) = &aborted {
        warn!("run stopped after {} negotiations: {e}", transcripts.len());
    }
    let behavior = if cfg.evaluate_behavior && aborted.is_none() {
        Some(behavior(cfg, &backends, &transcripts)?)
    } else {
        None
    };
    let summary = RunSummary {
        domain: cfg.domain,
        negotiator: cfg.negotiator,
        opponent_strategy: cfg.opponent_strategy,
        seed: cfg.seed,
        aggregate: aggregate(&records)?,
        behavior,
        final_weights: policy.as_ref().and_then(|p| p.reliability()).map(|w| w.weights()),
        aborted,
    };

    let resolved = serde_json::json!({ "experiment": cfg, "hyperparameters": h });
    let out = &cfg.out;
    fs::write(out.join("config.json"), serde_json::to_string_pretty(&resolved)? + "\n")?;
    fs::write(out.join("scenarios.jsonl"), set.to_jsonl())?;
    fs::write(out.join("transcripts.jsonl"), transcripts.iter().map(Transcript::to_jsonl).collect::<String>())?;
    fs::write(out.join("outcomes.jsonl"), jsonl(&records))?;
    fs::write(out.join("weights.csv"), weights_csv(&transcripts, &finals))?;
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    fs::write(out.join("summary.txt"), summary_text(&summary))?;
    if let Some(q) = policy.as_ref().and_then(|p| p.qtable()) {
        q.save(out.join("qtable.txt"))?;
    }

    Ok(ExperimentReport {
        summary,
        transcripts,
        records,
    })
}

fn run_label(s: &RunSummary) -> String {
    format!("{} vs {}", s.negotiator, s.opponent_strategy)
}

fn summary_text(s: &RunSummary) -> String {
    let mut out = format!("domain: {}  seed: {}\n\n", s.domain, s.seed);
    out.push_str(&summary_table(&[(run_label(s), s.aggregate.clone())], false));
    if let Some(b) = &s.behavior {
        writeln!(
            out,
            "\nbehavior over {} turns: tracking {:.1}%  consistency {:.1}%  manipulation {:.1}%",
            b.turns, b.tracking.rate_percent, b.consistency.rate_percent, b.manipulation.rate_percent
        )
        .unwrap();
    }
    if let Some(w) = s.final_weights {
        writeln!(out, "final weights: game_theory {:.4}  q_learning {:.4}  coherence {:.4}", w[0], w[1], w[2]).unwrap();
    }
    if let Some(e) = &s.aborted {
        writeln!(out, "aborted: {e}").unwrap();
    }
    out
}

pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Usage(format!("{} is not a completed run directory: {e}", dir.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Side-by-side table of completed runs, best value per column starred.
pub fn compare(dirs: &[PathBuf]) -> Result<String> {
    if dirs.len() < 2 {
        return Err(Error::Usage("compare needs at least two run directories".into()));
    }
    let summaries = dirs.iter().map(|d| read_summary(d)).collect::<Result<Vec<_>>>()?;
    let domain = summaries[0].domain;
    if let Some((d, s)) = dirs.iter().zip(&summaries).find(|(_, s)| s.domain != domain) {
        return Err(Error::Usage(format!(
            "cannot compare runs from different domains: {} is {} but {} is {}",
            dirs[0].display(),
            domain,
            d.display(),
            s.domain
        )));
    }
    let rows: Vec<(String, AggregateSummary)> = dirs
        .iter()
        .zip(&summaries)
        .map(|(d, s)| {
            let name = d.file_name().map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned());
            (format!("{name} ({})", run_label(s)), s.aggregate.clone())
        })
        .collect();
    Ok(format!("domain: {domain}\n\n{}", summary_table(&rows, true)))
}
