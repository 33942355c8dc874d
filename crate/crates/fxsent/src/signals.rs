//! Fusion of windowed sentiment with SMA/RSI confirmation into graded
//! trading signals.
//!
//! A buy needs sentiment at or above the positive threshold, close above the
//! SMA and RSI above 50; a sell needs the mirror conditions. Anything else —
//! including boundary equalities and bars with too few documents — yields no
//! signal. An issued signal is graded Strong when |sentiment| reaches the
//! strong threshold.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::IndicatorSeries;
use crate::ingest::PriceSeries;
use crate::lexicon::{aggregate_sentiment, LexiconError};
use crate::types::{Engine, SentimentScore};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid fusion config: {0}")]
    BadConfig(String),
    #[error("sentiment aggregation failed")]
    Aggregate(#[from] LexiconError),
    #[error("signals CSV read failed")]
    Csv(#[from] csv::Error),
    #[error("signals CSV row {row}: invalid {field} cell `{text}`")]
    BadCell {
        row: usize,
        field: &'static str,
        text: String,
    },
    #[error("signals CSV header must be `{expected}`, got `{got}`")]
    BadHeader { expected: String, got: String },
    #[error("write failed")]
    Io(#[from] std::io::Error),
}

/// Signal direction. `None` means the conditions did not align.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Buy,
    Sell,
    None,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Buy => "buy",
            Direction::Sell => "sell",
            Direction::None => "none",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "buy" => Ok(Direction::Buy),
            "sell" => Ok(Direction::Sell),
            "none" => Ok(Direction::None),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// Grade of an issued signal, driven by sentiment magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Normal,
    Strong,
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strength::Normal => "normal",
            Strength::Strong => "strong",
        })
    }
}

impl FromStr for Strength {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Strength::Normal),
            "strong" => Ok(Strength::Strong),
            other => Err(format!("unknown strength `{other}`")),
        }
    }
}

/// The three fusion conditions, evaluated against the direction the
/// sentiment score suggests. All false when sentiment is neutral or absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rationale {
    pub sentiment_aligned: bool,
    pub sma_aligned: bool,
    pub rsi_aligned: bool,
}

/// A fused decision for one bar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TradingSignal {
    pub direction: Direction,
    /// Present exactly when `direction != None`.
    pub strength: Option<Strength>,
    pub rationale: Rationale,
}

impl TradingSignal {
    fn none(rationale: Rationale) -> TradingSignal {
        TradingSignal {
            direction: Direction::None,
            strength: None,
            rationale,
        }
    }
}

/// Fusion thresholds and the sentiment lookback window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub pos_threshold: f64,
    pub neg_threshold: f64,
    pub strong_threshold: f64,
    pub sentiment_window: Duration,
    pub min_docs: usize,
}

impl Default for FusionConfig {
    fn default() -> FusionConfig {
        FusionConfig {
            pos_threshold: 0.05,
            neg_threshold: -0.05,
            strong_threshold: 0.5,
            sentiment_window: Duration::hours(24),
            min_docs: 1,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(0.0 < self.pos_threshold
            && self.pos_threshold < self.strong_threshold
            && self.strong_threshold <= 1.0)
        {
            return Err(SignalError::BadConfig(format!(
                "need 0 < pos_threshold < strong_threshold <= 1, got ({}, {})",
                self.pos_threshold, self.strong_threshold
            )));
        }
        if self.neg_threshold >= 0.0 {
            return Err(SignalError::BadConfig(format!(
                "neg_threshold must be < 0, got {}",
                self.neg_threshold
            )));
        }
        if self.sentiment_window <= Duration::zero() {
            return Err(SignalError::BadConfig(
                "sentiment_window must be positive".into(),
            ));
        }
        if self.min_docs < 1 {
            return Err(SignalError::BadConfig("min_docs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything known about one bar when the fusion rule runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalContext {
    pub timestamp: DateTime<Utc>,
    pub pair: String,
    /// Window aggregate; meaningful only when `doc_count > 0`.
    pub sentiment: SentimentScore,
    pub doc_count: usize,
    pub close: f64,
    pub sma_value: f64,
    pub rsi_value: f64,
}

/// Applies the fusion rule to one bar.
///
/// Buy iff sentiment >= pos_threshold AND close > sma AND rsi > 50;
/// Sell iff sentiment <= neg_threshold AND close < sma AND rsi < 50;
/// otherwise no signal. Comparisons are strict, so boundary equalities
/// produce no signal, as does a bar with fewer than `min_docs` documents.
pub fn generate_signal(ctx: &SignalContext, config: &FusionConfig) -> TradingSignal {
    if ctx.doc_count < config.min_docs {
        return TradingSignal::none(Rationale::default());
    }
    let s = ctx.sentiment.value();
    let (direction, rationale) = if s >= config.pos_threshold {
        let rationale = Rationale {
            sentiment_aligned: true,
            sma_aligned: ctx.close > ctx.sma_value,
            rsi_aligned: ctx.rsi_value > 50.0,
        };
        (Direction::Buy, rationale)
    } else if s <= config.neg_threshold {
        let rationale = Rationale {
            sentiment_aligned: true,
            sma_aligned: ctx.close < ctx.sma_value,
            rsi_aligned: ctx.rsi_value < 50.0,
        };
        (Direction::Sell, rationale)
    } else {
        return TradingSignal::none(Rationale::default());
    };

    if rationale.sma_aligned && rationale.rsi_aligned {
        let strength = if s.abs() >= config.strong_threshold {
            Strength::Strong
        } else {
            Strength::Normal
        };
        TradingSignal {
            direction,
            strength: Some(strength),
            rationale,
        }
    } else {
        TradingSignal::none(rationale)
    }
}

/// One scored document positioned in time, ready for window aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDoc {
    pub timestamp: DateTime<Utc>,
    pub weight: f64,
    pub score: SentimentScore,
}

/// Aggregates the documents falling in `[bar_close - window, bar_close)`.
/// Returns the weighted score and the document count, or `None` when the
/// window is empty.
pub fn window_sentiment(
    docs: &[ScoredDoc],
    bar_close: DateTime<Utc>,
    window: Duration,
) -> Result<Option<(SentimentScore, usize)>, LexiconError> {
    let start = bar_close - window;
    let in_window: Vec<(SentimentScore, f64)> = docs
        .iter()
        .filter(|d| d.timestamp >= start && d.timestamp < bar_close)
        .map(|d| (d.score, d.weight))
        .collect();
    if in_window.is_empty() {
        return Ok(None);
    }
    let aggregate = aggregate_sentiment(&in_window)?;
    Ok(Some((aggregate, in_window.len())))
}

/// One output row of the signals CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRow {
    pub timestamp: DateTime<Utc>,
    pub pair: String,
    pub direction: Direction,
    pub strength: Option<Strength>,
    /// Aggregated sentiment value; absent when no documents were in window.
    pub sentiment: Option<f64>,
    pub close: f64,
    pub sma: f64,
    pub rsi: f64,
    pub doc_count: usize,
}

/// Runs the fusion rule across every bar where both indicators are defined,
/// producing one row per bar in timestamp order.
pub fn generate_signal_rows(
    series: &PriceSeries,
    docs: &[ScoredDoc],
    sma: &IndicatorSeries,
    rsi: &IndicatorSeries,
    config: &FusionConfig,
    engine: Engine,
) -> Result<Vec<SignalRow>, SignalError> {
    config.validate()?;
    let mut rows = Vec::new();
    for (i, bar) in series.bars.iter().enumerate() {
        let (Some(sma_value), Some(rsi_value)) = (sma.value_at_index(i), rsi.value_at_index(i))
        else {
            continue;
        };
        let windowed = window_sentiment(docs, bar.date, config.sentiment_window)?;
        let (sentiment, doc_count) = match windowed {
            Some((score, count)) => (score, count),
            None => (SentimentScore::clamped(0.0, engine), 0),
        };
        let ctx = SignalContext {
            timestamp: bar.date,
            pair: series.pair.clone(),
            sentiment,
            doc_count,
            close: bar.close,
            sma_value,
            rsi_value,
        };
        let signal = generate_signal(&ctx, config);
        rows.push(SignalRow {
            timestamp: bar.date,
            pair: series.pair.clone(),
            direction: signal.direction,
            strength: signal.strength,
            sentiment: (doc_count > 0).then(|| sentiment.value()),
            close: bar.close,
            sma: sma_value,
            rsi: rsi_value,
            doc_count,
        });
    }
    Ok(rows)
}

const SIGNALS_HEADER: &str = "timestamp,pair,direction,strength,sentiment,close,sma,rsi,doc_count";

fn format_utc(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Writes signal rows as CSV (`timestamp,pair,direction,strength,sentiment,
/// close,sma,rsi,doc_count`). Output is byte-deterministic for equal input.
pub fn write_signals_csv<W: Write>(rows: &[SignalRow], writer: &mut W) -> Result<(), SignalError> {
    writeln!(writer, "{SIGNALS_HEADER}")?;
    for row in rows {
        let strength = row.strength.map(|s| s.to_string()).unwrap_or_default();
        let sentiment = row.sentiment.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{},{}",
            format_utc(row.timestamp),
            row.pair,
            row.direction,
            strength,
            sentiment,
            row.close,
            row.sma,
            row.rsi,
            row.doc_count
        )?;
    }
    Ok(())
}

/// Reads a signals CSV produced by [`write_signals_csv`].
pub fn read_signals_csv<R: Read>(reader: R) -> Result<Vec<SignalRow>, SignalError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let got = csv.headers()?.iter().collect::<Vec<_>>().join(",");
    if got != SIGNALS_HEADER {
        return Err(SignalError::BadHeader {
            expected: SIGNALS_HEADER.to_string(),
            got,
        });
    }
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let n = i + 1;
        let cell = |idx: usize| record.get(idx).unwrap_or("");
        let bad = |field: &'static str, text: &str| SignalError::BadCell {
            row: n,
            field,
            text: text.to_string(),
        };

        let timestamp = DateTime::parse_from_rfc3339(cell(0))
            .map_err(|_| bad("timestamp", cell(0)))?
            .with_timezone(&Utc);
        let direction: Direction = cell(2).parse().map_err(|_| bad("direction", cell(2)))?;
        let strength = if cell(3).is_empty() {
            None
        } else {
            Some(cell(3).parse().map_err(|_| bad("strength", cell(3)))?)
        };
        let sentiment = if cell(4).is_empty() {
            None
        } else {
            Some(cell(4).parse().map_err(|_| bad("sentiment", cell(4)))?)
        };
        rows.push(SignalRow {
            timestamp,
            pair: cell(1).to_string(),
            direction,
            strength,
            sentiment,
            close: cell(5).parse().map_err(|_| bad("close", cell(5)))?,
            sma: cell(6).parse().map_err(|_| bad("sma", cell(6)))?,
            rsi: cell(7).parse().map_err(|_| bad("rsi", cell(7)))?,
            doc_count: cell(8).parse().map_err(|_| bad("doc_count", cell(8)))?,
        });
    }
    Ok(rows)
}
