//! Shared domain types used across the pipeline stages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("unknown class label `{0}` (expected negative|neutral|positive)")]
    UnknownClassLabel(String),
    #[error("unknown engine `{0}` (expected lexicon|nbayes)")]
    UnknownEngine(String),
    #[error("sentiment score {0} outside the open interval (-1, +1)")]
    ScoreOutOfRange(f64),
}

/// Sentiment class assigned to a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Negative,
    Neutral,
    Positive,
}

impl ClassLabel {
    /// Fixed class order used for vectors, matrices and serialized output.
    pub const ALL: [ClassLabel; 3] = [
        ClassLabel::Negative,
        ClassLabel::Neutral,
        ClassLabel::Positive,
    ];

    /// Dense index into the canonical class order.
    pub fn index(self) -> usize {
        match self {
            ClassLabel::Negative => 0,
            ClassLabel::Neutral => 1,
            ClassLabel::Positive => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<ClassLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Negative => "negative",
            ClassLabel::Neutral => "neutral",
            ClassLabel::Positive => "positive",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" => Ok(ClassLabel::Negative),
            "neutral" => Ok(ClassLabel::Neutral),
            "positive" => Ok(ClassLabel::Positive),
            other => Err(TypeError::UnknownClassLabel(other.to_string())),
        }
    }
}

/// A classifier decision: either a class or an abstention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Class(ClassLabel),
    /// The classifier declined to assign a class (posterior below the
    /// rejection threshold). Rejected documents are excluded from sentiment
    /// aggregation and counted separately by the evaluation metrics.
    Rejected,
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Class(label) => label.fmt(f),
            Prediction::Rejected => f.write_str("rejected"),
        }
    }
}

/// Which sentiment engine produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Lexicon,
    NBayes,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Lexicon => "lexicon",
            Engine::NBayes => "nbayes",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lexicon" => Ok(Engine::Lexicon),
            "nbayes" => Ok(Engine::NBayes),
            other => Err(TypeError::UnknownEngine(other.to_string())),
        }
    }
}

/// Largest magnitude a sentiment score may take. Scores live in the open
/// interval (-1, +1); engine outputs that would saturate to exactly +/-1 in
/// floating point are clamped to this bound instead.
pub const MAX_SCORE_MAGNITUDE: f64 = 1.0 - f64::EPSILON / 2.0;

/// A polarity value in (-1, +1) tagged with the engine that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    value: f64,
    engine: Engine,
}

impl SentimentScore {
    /// Builds a score, rejecting values outside the open interval (-1, +1).
    pub fn new(value: f64, engine: Engine) -> Result<SentimentScore, TypeError> {
        if !value.is_finite() || value.abs() > MAX_SCORE_MAGNITUDE {
            return Err(TypeError::ScoreOutOfRange(value));
        }
        Ok(SentimentScore { value, engine })
    }

    /// Builds a score, clamping saturated values back into (-1, +1).
    /// Used by engines whose exact math stays inside the interval but whose
    /// floating-point evaluation can round onto the boundary.
    pub fn clamped(value: f64, engine: Engine) -> SentimentScore {
        let value = if value.is_finite() { value } else { 0.0 };
        SentimentScore {
            value: value.clamp(-MAX_SCORE_MAGNITUDE, MAX_SCORE_MAGNITUDE),
            engine,
        }
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn engine(self) -> Engine {
        self.engine
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_label_round_trips_through_str() {
        for label in ClassLabel::ALL {
            assert_eq!(label.as_str().parse::<ClassLabel>().unwrap(), label);
        }
        assert!("bogus".parse::<ClassLabel>().is_err());
    }

    #[test]
    fn class_indices_are_dense() {
        for (i, label) in ClassLabel::ALL.into_iter().enumerate() {
            assert_eq!(label.index(), i);
            assert_eq!(ClassLabel::from_index(i), Some(label));
        }
        assert_eq!(ClassLabel::from_index(3), None);
    }

    #[test]
    fn score_bounds_are_open() {
        assert!(SentimentScore::new(0.999, Engine::Lexicon).is_ok());
        assert!(SentimentScore::new(1.0, Engine::Lexicon).is_err());
        assert!(SentimentScore::new(-1.0, Engine::NBayes).is_err());
        assert!(SentimentScore::new(f64::NAN, Engine::Lexicon).is_err());

        let clamped = SentimentScore::clamped(1.0, Engine::NBayes);
        assert!(clamped.value() < 1.0);
        assert_eq!(
            SentimentScore::clamped(-7.0, Engine::NBayes).value(),
            -MAX_SCORE_MAGNITUDE
        );
    }

    #[test]
    fn max_magnitude_is_the_predecessor_of_one() {
        let below_one = f64::from_bits(1.0f64.to_bits() - 1);
        assert_eq!(MAX_SCORE_MAGNITUDE, below_one);
    }
}
