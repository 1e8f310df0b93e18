//! Win-Stay, Lose-Shift emotion selection over a fixed 7x7 payoff matrix.
//!
//! Rows are the client's (opponent's) emotion, columns the agent's
//! (negotiator's) candidate emotion. Each cell holds
//! `(client_payoff, agent_payoff)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::emotion::{argmax_scores, rank_descending, softmax, Emotion, Scores, N_EMOTIONS};
use crate::error::{Error, Result};
use crate::orchestrator::{AgentId, AgentRecommendation};

/// `(client_payoff, agent_payoff)`
pub type Payoff = (u8, u8);

#[rustfmt::skip]
const PUBLISHED: [[Payoff; N_EMOTIONS]; N_EMOTIONS] = [
    //  joy     sadness anger   fear    surprise disgust neutral
    [(4, 4), (2, 3), (1, 2), (2, 1), (3, 3), (2, 2), (3, 3)], // joy
    [(3, 2), (3, 3), (1, 2), (2, 1), (2, 2), (1, 1), (2, 3)], // sadness
    [(2, 1), (2, 1), (1, 1), (1, 0), (1, 2), (0, 1), (1, 2)], // anger
    [(1, 2), (1, 2), (0, 1), (2, 2), (1, 2), (0, 1), (2, 3)], // fear
    [(3, 3), (2, 2), (2, 1), (2, 1), (4, 4), (1, 2), (3, 3)], // surprise
    [(2, 2), (1, 1), (1, 0), (1, 0), (2, 1), (2, 2), (2, 2)], // disgust
    [(3, 3), (2, 3), (2, 1), (3, 2), (3, 3), (2, 2), (3, 3)], // neutral
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PayoffMatrix {
    cells: [[Payoff; N_EMOTIONS]; N_EMOTIONS],
}

impl Default for PayoffMatrix {
    fn default() -> Self {
        Self::published()
    }
}

impl PayoffMatrix {
    pub const MAX_PAYOFF: u8 = 4;

    /// The emotion-interaction payoff table the agent ships with.
    pub fn published() -> Self {
        PayoffMatrix { cells: PUBLISHED }
    }

    pub fn lookup(&self, client: Emotion, agent: Emotion) -> Payoff {
        self.cells[client.index()][agent.index()]
    }

    /// Agent payoffs for every candidate response to `client`.
    pub fn agent_row(&self, client: Emotion) -> Scores {
        self.cells[client.index()].map(|(_, a)| f64::from(a))
    }

    /// Serializes as a 7x7 CSV; cells are written `client:agent`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("client");
        for e in Emotion::ALL {
            out.push(',');
            out.push_str(e.label());
        }
        out.push('\n');
        for row in Emotion::ALL {
            out.push_str(row.label());
            for col in Emotion::ALL {
                let (c, a) = self.lookup(row, col);
                let _ = write!(out, ",{c}:{a}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, reason: "empty file".into() })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() != N_EMOTIONS + 1 {
            return Err(Error::Parse { line: 1, reason: format!("expected 8 columns, got {}", cols.len()) });
        }
        let col_emotions = cols[1..]
            .iter()
            .map(|c| c.parse::<Emotion>())
            .collect::<Result<Vec<_>>>()?;

        let mut cells = [[(0u8, 0u8); N_EMOTIONS]; N_EMOTIONS];
        let mut seen = [false; N_EMOTIONS];
        for (i, line) in lines {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != N_EMOTIONS + 1 {
                return Err(Error::Parse { line: lineno, reason: "wrong column count".into() });
            }
            let row: Emotion = fields[0].parse()?;
            seen[row.index()] = true;
            for (col, cell) in col_emotions.iter().zip(&fields[1..]) {
                let (c, a) = cell
                    .split_once(':')
                    .ok_or_else(|| Error::Parse { line: lineno, reason: format!("bad cell `{cell}`") })?;
                let parse = |s: &str| -> Result<u8> {
                    let v: u8 = s.trim().parse().map_err(|_| Error::Parse {
                        line: lineno,
                        reason: format!("bad payoff `{s}`"),
                    })?;
                    if v > Self::MAX_PAYOFF {
                        return Err(Error::Parse { line: lineno, reason: format!("payoff {v} outside [0,4]") });
                    }
                    Ok(v)
                };
                cells[row.index()][col.index()] = (parse(c)?, parse(a)?);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parse { line: 0, reason: "missing rows".into() });
        }
        Ok(PayoffMatrix { cells })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valence {
    Positive,
    Negative,
    Other,
}

pub fn classify_valence(e: Emotion) -> Valence {
    match e {
        Emotion::Joy | Emotion::Neutral | Emotion::Surprise => Valence::Positive,
        Emotion::Anger | Emotion::Disgust | Emotion::Fear => Valence::Negative,
        Emotion::Sadness => Valence::Other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WslsConfig {
    /// Previous-round agent payoff below which the agent shifts.
    pub win_threshold: f64,
    /// Multiplier on positive-valence candidates when the client is positive.
    pub favoritism: f64,
    /// Stored for completeness; no selection rule consumes it.
    pub negativity_threshold: u32,
    /// Softmax temperature used to turn payoffs into confidences.
    pub confidence_temperature: f64,
}

impl Default for WslsConfig {
    fn default() -> Self {
        WslsConfig {
            win_threshold: 2.0,
            favoritism: 1.3,
            negativity_threshold: 2,
            confidence_temperature: 1.0,
        }
    }
}

/// Per-negotiation memory of the previous exchange.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WslsState {
    pub last_client_emotion: Option<Emotion>,
    pub last_agent_emotion: Option<Emotion>,
    pub win_threshold: f64,
}

impl Default for WslsState {
    fn default() -> Self {
        WslsState::new(2.0).expect("default threshold is valid")
    }
}

impl WslsState {
    pub fn new(win_threshold: f64) -> Result<Self> {
        if !(win_threshold >= 0.0) || !win_threshold.is_finite() {
            return Err(Error::param("win_threshold", format!("must be non-negative, got {win_threshold}")));
        }
        Ok(WslsState {
            last_client_emotion: None,
            last_agent_emotion: None,
            win_threshold,
        })
    }

    pub fn reset(&mut self) {
        self.last_client_emotion = None;
        self.last_agent_emotion = None;
    }
}

/// The game-theoretic selector: payoff table plus configuration.
#[derive(Clone, Debug, Default)]
pub struct GameTheoryAgent {
    pub matrix: PayoffMatrix,
    pub config: WslsConfig,
}

impl GameTheoryAgent {
    pub fn new(config: WslsConfig) -> Self {
        GameTheoryAgent {
            matrix: PayoffMatrix::published(),
            config,
        }
    }

    pub fn new_state(&self) -> WslsState {
        WslsState {
            last_client_emotion: None,
            last_agent_emotion: None,
            win_threshold: self.config.win_threshold,
        }
    }

    /// Whether the previous exchange recorded in `state` counts as a loss.
    pub fn lost_last_round(&self, state: &WslsState) -> bool {
        match (state.last_client_emotion, state.last_agent_emotion) {
            (Some(c), Some(a)) => f64::from(self.matrix.lookup(c, a).1) < state.win_threshold,
            _ => false,
        }
    }

    pub fn select(&self, client: Emotion, state: &mut WslsState) -> AgentRecommendation {
        let payoffs = self.matrix.agent_row(client);

        let mut favored = payoffs;
        if classify_valence(client) == Valence::Positive {
            for e in Emotion::ALL {
                if classify_valence(e) == Valence::Positive {
                    favored[e.index()] *= self.config.favoritism;
                }
            }
        }
        let mut pick = argmax_scores(&favored);

        if self.lost_last_round(state) {
            // second entry of the raw payoffs sorted descending
            pick = rank_descending(&payoffs)[1];
        }

        let confidence = softmax(&payoffs, self.config.confidence_temperature)
            .expect("payoffs are finite and temperature validated");

        state.last_client_emotion = Some(client);
        state.last_agent_emotion = Some(pick);
        AgentRecommendation::new(AgentId::GameTheory, confidence, pick)
    }
}

/// Convenience wrapper with default configuration.
pub fn wsls_select(client: Emotion, state: &mut WslsState) -> AgentRecommendation {
    let agent = GameTheoryAgent {
        config: WslsConfig {
            win_threshold: state.win_threshold,
            ..WslsConfig::default()
        },
        ..GameTheoryAgent::default()
    };
    agent.select(client, state)
}

pub fn payoff_lookup(client: Emotion, agent: Emotion) -> Payoff {
    PayoffMatrix::published().lookup(client, agent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Emotion::*;

    #[test]
    fn lookup_examples() {
        assert_eq!(payoff_lookup(Joy, Joy), (4, 4));
        assert_eq!(payoff_lookup(Anger, Anger), (1, 1));
        assert_eq!(payoff_lookup(Fear, Neutral), (2, 3));
    }

    #[test]
    fn all_payoffs_in_range() {
        let m = PayoffMatrix::published();
        for c in Emotion::ALL {
            for a in Emotion::ALL {
                let (x, y) = m.lookup(c, a);
                assert!(x <= 4 && y <= 4);
            }
        }
    }

    #[test]
    fn csv_round_trip_and_rejects_garbage() {
        let m = PayoffMatrix::published();
        let csv = m.to_csv();
        assert!(csv.starts_with("client,joy,sadness,anger,fear,surprise,disgust,neutral\n"));
        assert!(csv.contains("\nanger,2:1,2:1,1:1,1:0,1:2,0:1,1:2\n"));
        assert_eq!(PayoffMatrix::from_csv(&csv).unwrap(), m);

        let bad = csv.replace("4:4", "5:4");
        assert!(PayoffMatrix::from_csv(&bad).is_err());
        let short: String = csv.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(PayoffMatrix::from_csv(&short).is_err());
    }

    #[test]
    fn select_without_history() {
        let mut s = WslsState::default();
        assert_eq!(wsls_select(Joy, &mut s).pick, Joy);
        assert_eq!(s.last_client_emotion, Some(Joy));
        assert_eq!(s.last_agent_emotion, Some(Joy));

        let mut s = WslsState::default();
        assert_eq!(wsls_select(Anger, &mut s).pick, Surprise);
    }

    #[test]
    fn lose_shift_to_second_best() {
        let mut s = WslsState {
            last_client_emotion: Some(Fear),
            last_agent_emotion: Some(Disgust),
            ..WslsState::default()
        };
        assert_eq!(payoff_lookup(Fear, Disgust).1, 1);
        let rec = wsls_select(Joy, &mut s);
        assert_eq!(rec.pick, Sadness);
        assert_eq!(s.last_agent_emotion, Some(Sadness));
    }

    #[test]
    fn win_stays_with_best() {
        let mut s = WslsState {
            last_client_emotion: Some(Joy),
            last_agent_emotion: Some(Joy),
            ..WslsState::default()
        };
        assert_eq!(wsls_select(Joy, &mut s).pick, Joy);
    }

    #[test]
    fn zero_threshold_never_shifts() {
        let agent = GameTheoryAgent::default();
        for pc in Emotion::ALL {
            for pa in Emotion::ALL {
                let mut s = WslsState::new(0.0).unwrap();
                s.last_client_emotion = Some(pc);
                s.last_agent_emotion = Some(pa);
                assert!(!agent.lost_last_round(&s));
            }
        }
    }

    #[test]
    fn negative_threshold_rejected() {
        assert!(WslsState::new(-1.0).is_err());
    }

    #[test]
    fn confidences_are_payoff_softmax() {
        let mut s = WslsState::default();
        let rec = wsls_select(Joy, &mut s);
        let expected = softmax(&[4.0, 3.0, 2.0, 1.0, 3.0, 2.0, 3.0], 1.0).unwrap();
        assert_eq!(rec.confidence, expected);
    }

    #[test]
    fn valence_classes() {
        assert_eq!(classify_valence(Joy), Valence::Positive);
        assert_eq!(classify_valence(Neutral), Valence::Positive);
        assert_eq!(classify_valence(Surprise), Valence::Positive);
        assert_eq!(classify_valence(Disgust), Valence::Negative);
        assert_eq!(classify_valence(Anger), Valence::Negative);
        assert_eq!(classify_valence(Fear), Valence::Negative);
        assert_eq!(classify_valence(Sadness), Valence::Other);
    }

    #[test]
    fn selection_is_deterministic() {
        for c in Emotion::ALL {
            let mut a = WslsState::default();
            let mut b = WslsState::default();
            for _ in 0..5 {
                assert_eq!(wsls_select(c, &mut a), wsls_select(c, &mut b));
            }
        }
    }
}
