//! Emotion label space and the shared numerics every selector uses.
//!
//! The canonical order is the payoff-table order: joy, sadness, anger, fear,
//! surprise, disgust, neutral. Every 7-vector in the crate is indexed by it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of emotion labels.
pub const N_EMOTIONS: usize = 7;

/// One real value per emotion, in canonical order.
pub type Scores = [f64; N_EMOTIONS];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Joy,
    Sadness,
    Anger,
    Fear,
    Surprise,
    Disgust,
    Neutral,
}

impl Emotion {
    pub const ALL: [Emotion; N_EMOTIONS] = [
        Emotion::Joy,
        Emotion::Sadness,
        Emotion::Anger,
        Emotion::Fear,
        Emotion::Surprise,
        Emotion::Disgust,
        Emotion::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Emotion::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Surprise => "surprise",
            Emotion::Disgust => "disgust",
            Emotion::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Emotion::ALL
            .into_iter()
            .find(|e| e.label() == lower)
            .ok_or_else(|| Error::UnknownEmotion(s.to_string()))
    }
}

/// Returns the last emotion label that appears as a whole word in `text`,
/// ignoring case. Used by every parser that reads a label out of free text.
pub fn last_label_in(text: &str) -> Option<Emotion> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .rev()
        .filter(|w| !w.is_empty())
        .find_map(|w| w.parse::<Emotion>().ok())
}

/// A probability vector over the seven emotions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmotionDistribution(Scores);

impl EmotionDistribution {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(probs: Scores) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0 + Self::TOLERANCE) {
            return Err(Error::InvalidInput(format!(
                "distribution entries must lie in [0, 1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "distribution sums to {sum}, expected 1"
            )));
        }
        Ok(EmotionDistribution(probs))
    }

    /// Normalizes non-negative weights to unit sum.
    pub fn from_weights(weights: Scores) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "weights must be finite and non-negative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidInput("weights sum to zero".into()));
        }
        Ok(EmotionDistribution(weights.map(|w| w / sum)))
    }

    pub fn uniform() -> Self {
        EmotionDistribution([1.0 / N_EMOTIONS as f64; N_EMOTIONS])
    }

    /// All mass on a single emotion.
    pub fn point(e: Emotion) -> Self {
        let mut p = [0.0; N_EMOTIONS];
        p[e.index()] = 1.0;
        EmotionDistribution(p)
    }

    pub fn prob(&self, e: Emotion) -> f64 {
        self.0[e.index()]
    }

    pub fn as_array(&self) -> &Scores {
        &self.0
    }

    /// Most probable emotion, lowest canonical index on ties.
    pub fn mode(&self) -> Emotion {
        argmax_scores(&self.0)
    }

    /// Inverse-CDF draw from a uniform variate `u` in [0, 1).
    pub fn sample_with(&self, u: f64) -> Emotion {
        let mut acc = 0.0;
        for e in Emotion::ALL {
            acc += self.0[e.index()];
            if u < acc {
                return e;
            }
        }
        // u landed in the rounding slack above the cumulative sum
        Emotion::ALL
            .into_iter()
            .rev()
            .find(|e| self.0[e.index()] > 0.0)
            .unwrap_or(Emotion::Neutral)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Emotion {
        self.sample_with(rng.random::<f64>())
    }
}

impl TryFrom<Vec<f64>> for EmotionDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: Scores = v
            .try_into()
            .map_err(|v: Vec<f64>| Error::InvalidInput(format!("expected 7 entries, got {}", v.len())))?;
        EmotionDistribution::new(arr)
    }
}

impl From<EmotionDistribution> for Vec<f64> {
    fn from(d: EmotionDistribution) -> Self {
        d.0.to_vec()
    }
}

/// Temperature softmax with max-subtraction.
pub fn softmax(scores: &Scores, temperature: f64) -> Result<EmotionDistribution> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::param("temperature", format!("must be positive, got {temperature}")));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {bad}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = scores.map(|s| ((s - max) / temperature).exp());
    let sum: f64 = exps.iter().sum();
    Ok(EmotionDistribution(exps.map(|x| x / sum)))
}

/// Emotion with the largest score; ties go to the smallest canonical index.
pub fn argmax_with_tiebreak(scores: &Scores) -> Result<Emotion> {
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite score {bad}")));
    }
    Ok(argmax_scores(scores))
}

pub(crate) fn argmax_scores(scores: &Scores) -> Emotion {
    let mut best = 0;
    for i in 1..N_EMOTIONS {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    Emotion::ALL[best]
}

/// Emotions ordered by descending score, canonical index breaking ties.
pub fn rank_descending(scores: &Scores) -> [Emotion; N_EMOTIONS] {
    let mut order = Emotion::ALL;
    // stable sort keeps canonical order among equal scores
    order.sort_by(|a, b| {
        scores[b.index()]
            .partial_cmp(&scores[a.index()])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Which side of the table an utterance came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Opponent,
    Negotiator,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Opponent => f.write_str("opponent"),
            Party::Negotiator => f.write_str("negotiator"),
        }
    }
}

/// Chronological record of expressed emotions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmotionHistory {
    entries: Vec<(Party, Emotion)>,
}

impl EmotionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, party: Party, emotion: Emotion) {
        self.entries.push((party, emotion));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Party, Emotion)] {
        &self.entries
    }

    /// The `min(n, len)` most recent entries, oldest first.
    pub fn window(&self, n: usize) -> &[(Party, Emotion)] {
        &self.entries[self.entries.len().saturating_sub(n)..]
    }

    /// The last `n` emotions expressed by one party, oldest first.
    pub fn party_window(&self, party: Party, n: usize) -> Vec<Emotion> {
        let mut out: Vec<Emotion> = self
            .entries
            .iter()
            .rev()
            .filter(|(p, _)| *p == party)
            .take(n)
            .map(|(_, e)| *e)
            .collect();
        out.reverse();
        out
    }

    pub fn last_of(&self, party: Party) -> Option<Emotion> {
        self.entries.iter().rev().find(|(p, _)| *p == party).map(|(_, e)| *e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_index_is_a_bijection() {
        for (i, e) in Emotion::ALL.iter().enumerate() {
            assert_eq!(e.index(), i);
            assert_eq!(Emotion::from_index(i), Some(*e));
        }
        assert_eq!(Emotion::from_index(7), None);
    }

    #[test]
    fn parsing_is_case_insensitive_and_strict() {
        assert_eq!("JoY".parse::<Emotion>().unwrap(), Emotion::Joy);
        assert_eq!(" Neutral ".parse::<Emotion>().unwrap(), Emotion::Neutral);
        assert!("ecstatic".parse::<Emotion>().is_err());
        assert!("".parse::<Emotion>().is_err());
    }

    #[test]
    fn serde_uses_lowercase_labels() {
        assert_eq!(serde_json::to_string(&Emotion::Surprise).unwrap(), "\"surprise\"");
        let e: Emotion = serde_json::from_str("\"disgust\"").unwrap();
        assert_eq!(e, Emotion::Disgust);
    }

    #[test]
    fn last_label_scan() {
        assert_eq!(last_label_in("The emotion is: Anger."), Some(Emotion::Anger));
        assert_eq!(last_label_in("joy or maybe FEAR"), Some(Emotion::Fear));
        assert_eq!(last_label_in("joyful"), None);
        assert_eq!(last_label_in("nothing here"), None);
    }

    #[test]
    fn softmax_equal_scores_is_uniform() {
        let d = softmax(&[3.5; 7], 0.1).unwrap();
        for p in d.as_array() {
            assert!((p - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_direct_values() {
        let d = softmax(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.1).unwrap();
        let e10 = 10f64.exp();
        assert!((d.prob(Emotion::Joy) - e10 / (e10 + 6.0)).abs() < 1e-12);
        assert!((d.prob(Emotion::Joy) - 0.999728).abs() < 1e-6);

        let d = softmax(&[2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1.0).unwrap();
        let e = 1f64.exp();
        assert!((d.prob(Emotion::Joy) - e / (e + 6.0)).abs() < 1e-12);
        assert!((d.prob(Emotion::Joy) - 0.31179).abs() < 1e-5);
        assert!((d.prob(Emotion::Fear) - 0.11470).abs() < 1e-5);
    }

    #[test]
    fn softmax_rejects_bad_arguments() {
        assert!(matches!(softmax(&[0.0; 7], 0.0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(softmax(&[0.0; 7], -1.0), Err(Error::InvalidParameter { .. })));
        let mut s = [0.0; 7];
        s[3] = f64::NAN;
        assert!(matches!(softmax(&s, 1.0), Err(Error::InvalidInput(_))));
        s[3] = f64::INFINITY;
        assert!(matches!(softmax(&s, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_with_tiebreak(&[4.0, 3.0, 2.0, 1.0, 3.0, 2.0, 3.0]).unwrap(), Emotion::Joy);
        assert_eq!(
            argmax_with_tiebreak(&[1.0, 1.0, 1.0, 0.0, 2.0, 1.0, 2.0]).unwrap(),
            Emotion::Surprise
        );
        assert_eq!(argmax_with_tiebreak(&[0.0; 7]).unwrap(), Emotion::Joy);
        assert!(argmax_with_tiebreak(&[f64::NAN; 7]).is_err());
    }

    #[test]
    fn ranking_is_stable_on_ties() {
        let r = rank_descending(&[4.0, 3.0, 2.0, 1.0, 3.0, 2.0, 3.0]);
        assert_eq!(&r[..4], &[Emotion::Joy, Emotion::Sadness, Emotion::Surprise, Emotion::Neutral]);
    }

    #[test]
    fn history_windows() {
        let mut h = EmotionHistory::new();
        assert!(h.window(5).is_empty());
        h.push(Party::Opponent, Emotion::Anger);
        h.push(Party::Negotiator, Emotion::Neutral);
        h.push(Party::Opponent, Emotion::Fear);
        assert_eq!(h.window(2), &[(Party::Negotiator, Emotion::Neutral), (Party::Opponent, Emotion::Fear)]);
        assert_eq!(h.window(10).len(), 3);
        assert_eq!(h.party_window(Party::Opponent, 5), vec![Emotion::Anger, Emotion::Fear]);
        assert_eq!(h.last_of(Party::Negotiator), Some(Emotion::Neutral));
    }

    #[test]
    fn distribution_validation() {
        assert!(EmotionDistribution::new([0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(EmotionDistribution::new([0.5, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(EmotionDistribution::new([1.5, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        let json = serde_json::to_string(&EmotionDistribution::uniform()).unwrap();
        let back: EmotionDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, EmotionDistribution::uniform());
        assert!(serde_json::from_str::<EmotionDistribution>("[1.0, 0.0]").is_err());
    }

    #[test]
    fn sampling_covers_support_only() {
        let d = EmotionDistribution::new([0.0, 0.5, 0.0, 0.0, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(d.sample_with(0.0), Emotion::Sadness);
        assert_eq!(d.sample_with(0.49), Emotion::Sadness);
        assert_eq!(d.sample_with(0.5), Emotion::Surprise);
        assert_eq!(d.sample_with(0.999_999_999_999), Emotion::Surprise);
    }

    fn scores() -> impl Strategy<Value = Scores> {
        proptest::array::uniform7(-50.0f64..50.0)
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(s in scores(), t in 1e-3f64..1e3) {
            let d = softmax(&s, t).unwrap();
            let sum: f64 = d.as_array().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }

        #[test]
        fn softmax_is_shift_invariant(s in scores(), c in -100.0f64..100.0, t in 0.05f64..10.0) {
            let a = softmax(&s, t).unwrap();
            let b = softmax(&s.map(|x| x + c), t).unwrap();
            for i in 0..N_EMOTIONS {
                prop_assert!((a.as_array()[i] - b.as_array()[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_preserves_argmax(s in scores(), t in 1e-3f64..1e3) {
            let d = softmax(&s, t).unwrap();
            prop_assert_eq!(argmax_with_tiebreak(d.as_array()).unwrap(), argmax_with_tiebreak(&s).unwrap());
        }

        #[test]
        fn low_temperature_concentrates(s in scores(), winner in 0usize..7, gap in 1.0f64..10.0, t in 1e-3f64..0.01) {
            let mut s = s.map(|x| x.min(0.0));
            s[winner] = gap;
            let d = softmax(&s, t).unwrap();
            prop_assert!(d.as_array()[winner] > 1.0 - 1e-6);
        }
    }
}
