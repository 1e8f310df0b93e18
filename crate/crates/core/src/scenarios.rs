//! Scenario records for the four negotiation domains: loading from JSONL
//! files and seeded synthetic generation.
//!
//! A scenario file holds one JSON object per line, using the dataset field
//! names (`Case_ID`, `Creditor_Target_Days`, ...). Blank lines and lines
//! starting with `#` are skipped. Fields the loader does not interpret are
//! kept verbatim and written back out unchanged.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::emotion::Emotion;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Debt,
    Medical,
    Emergency,
    Education,
}

impl Domain {
    pub const ALL: [Domain; 4] = [Domain::Debt, Domain::Medical, Domain::Emergency, Domain::Education];

    pub fn label(self) -> &'static str {
        match self {
            Domain::Debt => "debt",
            Domain::Medical => "medical",
            Domain::Emergency => "emergency",
            Domain::Education => "education",
        }
    }

    /// True when a smaller agreed value is a better outcome for the negotiator.
    ///
    /// Emergency and education score `(A - T) / T`, so larger values count as
    /// better there, even though the emergency domain's prose describes
    /// faster rescue as the goal.
    pub fn lower_is_better(self) -> bool {
        matches!(self, Domain::Debt | Domain::Medical)
    }

    pub fn unit(self) -> &'static str {
        match self {
            Domain::Debt | Domain::Medical => "days",
            Domain::Emergency => "minutes",
            Domain::Education => "minutes past 9 PM",
        }
    }

    pub fn negotiator_role(self) -> &'static str {
        match self {
            Domain::Debt => "creditor",
            Domain::Medical => "scheduling coordinator",
            Domain::Emergency => "rescue robot",
            Domain::Education => "bedtime companion",
        }
    }

    pub fn opponent_role(self) -> &'static str {
        match self {
            Domain::Debt => "debtor",
            Domain::Medical => "patient",
            Domain::Emergency => "survivor",
            Domain::Education => "student",
        }
    }

    /// `(negotiator target field, opponent target field)`.
    pub fn target_fields(self) -> (&'static str, &'static str) {
        match self {
            Domain::Debt => ("Creditor_Target_Days", "Debtor_Target_Days"),
            Domain::Medical => ("Hospital_Target_Wait_Days", "Patient_Target_Wait_Days"),
            Domain::Emergency => ("Rescue_Team_ETA", "Survivor_Target_Minutes"),
            Domain::Education => ("Robots_Requested_Bedtime", "Student_Wanted_Bedtime"),
        }
    }

    /// Moves `target` by `factor` in the direction that hurts the negotiator.
    pub fn adverse(self, target: f64, factor: f64) -> f64 {
        if self.lower_is_better() {
            target * factor
        } else {
            target / factor
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Domain::ALL
            .into_iter()
            .find(|d| d.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Usage(format!("unknown domain '{s}' (expected one of: debt, medical, emergency, education)")))
    }
}

/// How the opponent is instructed to behave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpponentStrategy {
    Vanilla,
    Pressuring,
    Victim,
    Threatening,
}

impl OpponentStrategy {
    pub const ALL: [OpponentStrategy; 4] = [
        OpponentStrategy::Vanilla,
        OpponentStrategy::Pressuring,
        OpponentStrategy::Victim,
        OpponentStrategy::Threatening,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OpponentStrategy::Vanilla => "vanilla",
            OpponentStrategy::Pressuring => "pressuring",
            OpponentStrategy::Victim => "victim",
            OpponentStrategy::Threatening => "threatening",
        }
    }
}

impl fmt::Display for OpponentStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OpponentStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpponentStrategy::ALL
            .into_iter()
            .find(|o| o.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown opponent strategy '{s}' (expected one of: vanilla, pressuring, victim, threatening)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub domain: Domain,
    pub case_id: String,
    /// The negotiator's target `T`, in domain units.
    pub negotiator_target: f64,
    pub opponent_target: f64,
    /// What is at stake, in domain units (USD, days or minutes).
    pub stake: f64,
    pub opponent_emotion: Option<Emotion>,
    /// Every field of the source record, including ones not interpreted here.
    pub fields: BTreeMap<String, Value>,
}

/// Parses `"HH:MM"` as minutes past 21:00. Times before noon count as
/// after midnight.
pub fn parse_bedtime(s: &str) -> Option<f64> {
    let (h, m) = s.trim().split_once(':')?;
    let h: u32 = h.trim().parse().ok()?;
    let m: u32 = m.trim().parse().ok()?;
    if h > 23 || m > 59 {
        return None;
    }
    let mut minutes = (h * 60 + m) as i64 - 21 * 60;
    if h < 12 {
        minutes += 24 * 60;
    }
    Some(minutes as f64)
}

/// Inverse of [`parse_bedtime`].
pub fn format_bedtime(minutes_past_nine: f64) -> String {
    let total = (21 * 60 + minutes_past_nine.round() as i64).rem_euclid(24 * 60);
    format!("{:02}:{:02}", total / 60, total % 60)
}

/// Factor used when the student's bedtime is recorded as `N/A`.
pub const UNSPECIFIED_TARGET_FACTOR: f64 = 2.0;

fn case_id_of(record: &Map<String, Value>) -> Option<String> {
    match record.get("Case_ID")? {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn number_field(record: &Map<String, Value>, case_id: &str, field: &'static str) -> Result<f64> {
    let v = record.get(field).ok_or_else(|| Error::Schema {
        record: case_id.to_string(),
        field: field.to_string(),
    })?;
    let n = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    n.ok_or_else(|| Error::Validation {
        record: case_id.to_string(),
        reason: format!("{field} is not a number: {v}"),
    })
}

fn bedtime_field(record: &Map<String, Value>, case_id: &str, field: &'static str) -> Result<Option<f64>> {
    let v = record.get(field).ok_or_else(|| Error::Schema {
        record: case_id.to_string(),
        field: field.to_string(),
    })?;
    match v {
        Value::String(s) if s.trim().eq_ignore_ascii_case("N/A") => Ok(None),
        Value::String(s) => parse_bedtime(s).map(Some).ok_or_else(|| Error::Validation {
            record: case_id.to_string(),
            reason: format!("{field} is not an HH:MM time: {s}"),
        }),
        Value::Number(n) => Ok(n.as_f64()),
        other => Err(Error::Validation {
            record: case_id.to_string(),
            reason: format!("{field} is not a time: {other}"),
        }),
    }
}

fn positive(case_id: &str, field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Validation {
            record: case_id.to_string(),
            reason: format!("{field} must be positive and finite, got {v}"),
        })
    }
}

impl Scenario {
    /// Builds a scenario from one record of the domain's schema.
    pub fn from_record(domain: Domain, record: Map<String, Value>) -> Result<Self> {
        let case_id = case_id_of(&record).ok_or_else(|| Error::Schema {
            record: "<unknown>".into(),
            field: "Case_ID".into(),
        })?;
        let (t_field, o_field) = domain.target_fields();

        let (target, opponent, stake) = match domain {
            Domain::Debt => {
                let t = number_field(&record, &case_id, t_field)?;
                let o = number_field(&record, &case_id, o_field)?;
                let amount = number_field(&record, &case_id, "Original_Amount_USD")?;
                let stake = match record.get("Outstanding_Balance_USD") {
                    Some(_) => number_field(&record, &case_id, "Outstanding_Balance_USD")?,
                    None => amount,
                };
                (t, o, stake)
            }
            Domain::Medical => {
                let t = number_field(&record, &case_id, t_field)?;
                let o = number_field(&record, &case_id, o_field)?;
                let stake = match record.get("Days_On_Waitlist") {
                    Some(_) => number_field(&record, &case_id, "Days_On_Waitlist")?,
                    None => t,
                };
                (t, o, stake)
            }
            Domain::Emergency => {
                let t = number_field(&record, &case_id, t_field)?;
                let o = number_field(&record, &case_id, o_field)?;
                let stake = match record.get("Estimated_Survivor_Endurance") {
                    Some(_) => number_field(&record, &case_id, "Estimated_Survivor_Endurance")?,
                    None => t,
                };
                (t, o, stake)
            }
            Domain::Education => {
                let t = bedtime_field(&record, &case_id, t_field)?.ok_or_else(|| Error::Validation {
                    record: case_id.clone(),
                    reason: format!("{t_field} cannot be N/A"),
                })?;
                let o = bedtime_field(&record, &case_id, o_field)?
                    .unwrap_or_else(|| domain.adverse(t, UNSPECIFIED_TARGET_FACTOR));
                (t, o, t)
            }
        };
        positive(&case_id, t_field, target)?;
        positive(&case_id, o_field, opponent)?;
        if !stake.is_finite() || stake < 0.0 {
            return Err(Error::Validation {
                record: case_id,
                reason: format!("stake must be non-negative, got {stake}"),
            });
        }

        let opponent_emotion = match record.get("Opponent_Emotion") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.parse::<Emotion>().map_err(|_| Error::Validation {
                record: case_id.clone(),
                reason: format!("Opponent_Emotion '{s}' is not one of the seven emotions"),
            })?),
            Some(other) => {
                return Err(Error::Validation {
                    record: case_id,
                    reason: format!("Opponent_Emotion must be a string, got {other}"),
                })
            }
        };

        Ok(Scenario {
            domain,
            case_id,
            negotiator_target: target,
            opponent_target: opponent,
            stake,
            opponent_emotion,
            fields: record.into_iter().collect(),
        })
    }

    /// The record as written to a scenario file.
    pub fn to_record(&self) -> Map<String, Value> {
        self.fields.clone().into_iter().collect()
    }

    /// Descriptive fields rendered as `Name: value` lines for prompts.
    pub fn describe(&self) -> String {
        let (t_field, o_field) = self.domain.target_fields();
        self.fields
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "Case_ID" | "Opponent_Emotion") && *k != t_field && *k != o_field)
            .map(|(k, v)| match v {
                Value::String(s) => format!("{}: {s}", k.replace('_', " ")),
                other => format!("{}: {other}", k.replace('_', " ")),
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    pub domain: Domain,
    /// Generation seed, when the set was generated rather than loaded.
    pub seed: Option<u64>,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn new(domain: Domain, seed: Option<u64>, scenarios: Vec<Scenario>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &scenarios {
            if s.domain != domain {
                return Err(Error::Validation {
                    record: s.case_id.clone(),
                    reason: format!("scenario domain {} does not match set domain {domain}", s.domain),
                });
            }
            if !seen.insert(s.case_id.as_str()) {
                return Err(Error::Validation {
                    record: s.case_id.clone(),
                    reason: "duplicate Case_ID".into(),
                });
            }
        }
        Ok(ScenarioSet { domain, seed, scenarios })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn parse(text: &str, domain: Domain) -> Result<Self> {
        let mut scenarios = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let record: Map<String, Value> = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            scenarios.push(Scenario::from_record(domain, record)?);
        }
        ScenarioSet::new(domain, None, scenarios)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.scenarios {
            out.push_str(&Value::Object(s.to_record()).to_string());
            out.push('\n');
        }
        out
    }

    /// Keeps the first `n` scenarios.
    pub fn truncate(&mut self, n: usize) {
        self.scenarios.truncate(n);
    }
}

pub fn load_scenarios(path: impl AsRef<Path>, domain: Domain) -> Result<ScenarioSet> {
    let text = std::fs::read_to_string(path)?;
    ScenarioSet::parse(&text, domain)
}

/// Documented generation ranges, inclusive.
pub mod ranges {
    pub const DEBT_AMOUNT_USD: (f64, f64) = (20_688.0, 49_775.0);
    pub const DEBT_OUTSTANDING_USD: f64 = 15_700.0;
    pub const DEBT_DAYS_OVERDUE: (i64, i64) = (32, 359);
    pub const DEBT_RECOVERY_PERCENT: (f64, f64) = (5.0, 89.33);
    pub const DEBT_CREDITOR_TARGET_DAYS: (i64, i64) = (15, 60);

    pub const MEDICAL_AGE: (i64, i64) = (8, 71);
    pub const MEDICAL_WAITLIST_DAYS: (i64, i64) = (5, 240);
    /// High, medium, low.
    pub const MEDICAL_URGENCY_SPLIT: [f64; 3] = [0.4, 0.4, 0.2];
    pub const MEDICAL_SENIOR_AVAILABLE: f64 = 0.35;
    pub const MEDICAL_TIME_REDUCTION_DAYS: (i64, i64) = (0, 90);
    pub const MEDICAL_HOSPITAL_TARGET_DAYS: (i64, i64) = (14, 120);

    pub const EMERGENCY_ETA_MINUTES: (i64, i64) = (20, 180);
    pub const EMERGENCY_ENDURANCE_MINUTES: (i64, i64) = (30, 480);

    pub const EDUCATION_AGE: (i64, i64) = (11, 18);
    /// Minutes past 9 PM.
    pub const EDUCATION_REQUESTED_BEDTIME: (i64, i64) = (15, 120);
    pub const EDUCATION_UNSPECIFIED_SHARE: f64 = 0.1;

    /// Opponent target = negotiator target moved adversely by a factor in this range.
    pub const OPPONENT_FACTOR: (f64, f64) = (1.5, 3.0);
}

const CREDIT_TYPES: [&str; 8] = [
    "Working Capital Loan",
    "Equipment Financing",
    "Commercial Mortgage",
    "Trade Credit",
    "Invoice Financing",
    "Line of Credit",
    "Term Loan",
    "Inventory Financing",
];
const OVERDUE_REASONS: [&str; 11] = [
    "Client bankruptcy",
    "Supply chain disruption",
    "Market downturn",
    "Delayed receivables",
    "Key customer loss",
    "Regulatory penalty",
    "Natural disaster",
    "Management turnover",
    "Cost overrun",
    "Litigation",
    "Seasonal slump",
];
const SECTORS: [&str; 3] = ["Manufacturing", "Retail", "Technology"];
const COLLATERAL: [&str; 6] = ["Inventory", "Real Estate", "Personal Guarantee", "Equipment", "Accounts Receivable", "None"];
const RECOVERY_STAGES: [&str; 6] = ["Early Delinquency", "Pre-Collection", "Pre-Legal", "Legal", "Late Delinquency", "Write-Off"];
const CASH_FLOW: [&str; 3] = ["Complete Breakdown", "Chronic Shortage", "Temporary Disruption"];
const SOLUTIONS: [&str; 5] = [
    "Collateral liquidation",
    "Partial payment plan",
    "Equity conversion",
    "Debt restructuring with extended terms",
    "Third-party guarantee",
];
const URGENCY: [&str; 3] = ["High", "Medium", "Low"];
const SURGEON_EXPERIENCE: [&str; 3] = ["Senior", "Mid-level", "Junior"];
const CONDITIONS: [(&str, &str); 5] = [
    ("Gallstones with recurrent pain", "Laparoscopic cholecystectomy"),
    ("Torn anterior cruciate ligament", "ACL reconstruction"),
    ("Inguinal hernia", "Hernia repair"),
    ("Severe hip osteoarthritis", "Total hip replacement"),
    ("Cataract", "Cataract extraction"),
];
const DISASTERS: [&str; 5] = ["Earthquake", "Urban_Fire", "Flash_Flood", "Landslide", "Building_Collapse"];
const SURVIVOR_CONDITIONS: [&str; 4] = ["Trapped, leg injury", "Conscious, mild hypothermia", "Dehydrated, disoriented", "Bleeding, stable"];
const NEEDS: [&str; 4] = ["Oxygen", "Water", "Painkillers", "Thermal blanket"];
const BACKGROUNDS: [&str; 5] = ["Academic high achiever", "Social media enthusiast", "Aspiring artist", "Competitive athlete", "Anxious perfectionist"];
const SITUATIONS: [&str; 4] = [
    "Exam tomorrow morning",
    "Argument with a friend online",
    "Unfinished creative project",
    "Too wired after evening practice",
];
const ANNOYANCES: [&str; 4] = ["Academic anxiety", "Fear of missing out", "Perfectionism", "Physiological arousal"];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty list")
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn opponent_factor(rng: &mut ChaCha8Rng) -> f64 {
    let (lo, hi) = ranges::OPPONENT_FACTOR;
    rng.random_range(lo..=hi)
}

fn generate_record(domain: Domain, id: usize, rng: &mut ChaCha8Rng) -> Map<String, Value> {
    use ranges::*;
    use serde_json::json;

    let mut r = Map::new();
    r.insert("Case_ID".into(), json!(id));
    match domain {
        Domain::Debt => {
            let target = rng.random_range(DEBT_CREDITOR_TARGET_DAYS.0..=DEBT_CREDITOR_TARGET_DAYS.1);
            let debtor = (domain.adverse(target as f64, opponent_factor(rng))).round() as i64;
            let overdue = rng.random_range(DEBT_DAYS_OVERDUE.0..=DEBT_DAYS_OVERDUE.1);
            r.insert("Creditor_Name".into(), json!(format!("Creditor {}", id)));
            r.insert("Debtor_Name".into(), json!(format!("Debtor Company {}", id)));
            r.insert("Credit_Type".into(), json!(pick(rng, &CREDIT_TYPES)));
            r.insert(
                "Original_Amount_USD".into(),
                json!(round2(rng.random_range(DEBT_AMOUNT_USD.0..=DEBT_AMOUNT_USD.1))),
            );
            r.insert("Outstanding_Balance_USD".into(), json!(DEBT_OUTSTANDING_USD));
            r.insert("Creditor_Target_Days".into(), json!(target));
            r.insert("Debtor_Target_Days".into(), json!(debtor));
            r.insert("Days_Overdue".into(), json!(overdue));
            r.insert("Reason_for_Overdue".into(), json!(pick(rng, &OVERDUE_REASONS)));
            r.insert("Business_Sector".into(), json!(pick(rng, &SECTORS)));
            r.insert("Collateral".into(), json!(pick(rng, &COLLATERAL)));
            r.insert("Recovery_Stage".into(), json!(pick(rng, &RECOVERY_STAGES)));
            r.insert("Cash_Flow_Situation".into(), json!(pick(rng, &CASH_FLOW)));
            r.insert("Proposed_Solution".into(), json!(pick(rng, &SOLUTIONS)));
            r.insert(
                "Recovery_Probability_Percent".into(),
                json!(round2(rng.random_range(DEBT_RECOVERY_PERCENT.0..=DEBT_RECOVERY_PERCENT.1))),
            );
            r.insert(
                "Interest_Accrued_USD".into(),
                json!(round2(DEBT_OUTSTANDING_USD * 0.08 * overdue as f64 / 365.0)),
            );
        }
        Domain::Medical => {
            let target = rng.random_range(MEDICAL_HOSPITAL_TARGET_DAYS.0..=MEDICAL_HOSPITAL_TARGET_DAYS.1);
            let patient = (domain.adverse(target as f64, opponent_factor(rng))).round() as i64;
            let u: f64 = rng.random();
            let urgency = if u < MEDICAL_URGENCY_SPLIT[0] {
                URGENCY[0]
            } else if u < MEDICAL_URGENCY_SPLIT[0] + MEDICAL_URGENCY_SPLIT[1] {
                URGENCY[1]
            } else {
                URGENCY[2]
            };
            let senior = rng.random_bool(MEDICAL_SENIOR_AVAILABLE);
            let (condition, surgery) = *CONDITIONS.choose(rng).expect("non-empty");
            r.insert("Patient_Age".into(), json!(rng.random_range(MEDICAL_AGE.0..=MEDICAL_AGE.1)));
            r.insert("Patient_Condition".into(), json!(condition));
            r.insert("Required_Surgery".into(), json!(surgery));
            r.insert("Urgency_Level".into(), json!(urgency));
            r.insert(
                "Days_On_Waitlist".into(),
                json!(rng.random_range(MEDICAL_WAITLIST_DAYS.0..=MEDICAL_WAITLIST_DAYS.1)),
            );
            r.insert("Preferred_Surgeon_Available".into(), json!(if senior { "Yes" } else { "No" }));
            r.insert(
                "Recommended_Surgeon_Experience".into(),
                json!(if senior { "Senior" } else { pick(rng, &SURGEON_EXPERIENCE[1..]) }),
            );
            r.insert(
                "Estimated_Time_Reduction".into(),
                json!(rng.random_range(MEDICAL_TIME_REDUCTION_DAYS.0..=MEDICAL_TIME_REDUCTION_DAYS.1)),
            );
            r.insert("Hospital_Target_Wait_Days".into(), json!(target));
            r.insert("Patient_Target_Wait_Days".into(), json!(patient));
        }
        Domain::Emergency => {
            let eta = rng.random_range(EMERGENCY_ETA_MINUTES.0..=EMERGENCY_ETA_MINUTES.1);
            let survivor = round2(domain.adverse(eta as f64, opponent_factor(rng)));
            r.insert("Disaster_Type".into(), json!(pick(rng, &DISASTERS)));
            r.insert("Survivor_Condition".into(), json!(pick(rng, &SURVIVOR_CONDITIONS)));
            r.insert(
                "Estimated_Survivor_Endurance".into(),
                json!(rng.random_range(EMERGENCY_ENDURANCE_MINUTES.0..=EMERGENCY_ENDURANCE_MINUTES.1)),
            );
            r.insert("Rescue_Team_ETA".into(), json!(eta));
            r.insert("Survivor_Target_Minutes".into(), json!(survivor));
            r.insert("Critical_Needs".into(), json!(pick(rng, &NEEDS)));
        }
        Domain::Education => {
            let (lo, hi) = EDUCATION_REQUESTED_BEDTIME;
            let requested = rng.random_range(lo / 5..=hi / 5) * 5;
            let unspecified = rng.random_bool(EDUCATION_UNSPECIFIED_SHARE);
            let wanted = domain.adverse(requested as f64, opponent_factor(rng)).round().max(1.0);
            r.insert("Student_Age".into(), json!(rng.random_range(EDUCATION_AGE.0..=EDUCATION_AGE.1)));
            r.insert("Student_Background".into(), json!(pick(rng, &BACKGROUNDS)));
            r.insert("Situation_Faced".into(), json!(pick(rng, &SITUATIONS)));
            r.insert("Robots_Requested_Bedtime".into(), json!(format_bedtime(requested as f64)));
            r.insert(
                "Student_Wanted_Bedtime".into(),
                json!(if unspecified { "N/A".to_string() } else { format_bedtime(wanted) }),
            );
            r.insert("Primary_Annoyance_Reason".into(), json!(pick(rng, &ANNOYANCES)));
        }
    }
    let emotion = *Emotion::ALL.choose(rng).expect("non-empty");
    r.insert("Opponent_Emotion".into(), json!(emotion.label()));
    r
}

/// Seeded synthetic scenarios within the documented ranges.
pub fn generate_synthetic(domain: Domain, n: usize, seed: u64) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(Error::param("n", "must generate at least one scenario"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenarios = (1..=n)
        .map(|id| Scenario::from_record(domain, generate_record(domain, id, &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    ScenarioSet::new(domain, Some(seed), scenarios)
}
