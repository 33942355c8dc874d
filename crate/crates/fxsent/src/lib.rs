//! Sentiment-driven Forex signal pipeline.
//!
//! Turns a corpus of USD-related news/post texts plus OHLC price history into
//! graded trading signals, then backtests and scores the result. Two
//! sentiment engines are provided — a valence-lexicon scorer and a Gaussian
//! Naive Bayes classifier with rejection — fused with SMA/RSI confirmation.
//!
//! Pipeline stages map onto the modules:
//!
//! - [`ingest`] — news CSV and OHLC CSV parsing/validation
//! - [`preprocess`] — text normalization, tokenization, stop-word removal
//! - [`lexicon`] — valence-lexicon polarity scoring and weighted aggregation
//! - [`nbayes`] — Gaussian Naive Bayes training, posteriors, rejection
//! - [`indicators`] — SMA and Wilder RSI over close prices
//! - [`signals`] — sentiment + indicator fusion into graded signals
//! - [`backtest`] — next-bar-open replay with slippage, trade accounting
//! - [`metrics`] — confusion matrix and accuracy/precision/recall/F1
//! - [`pipeline`] — end-to-end orchestration and the flat config format

pub mod backtest;
pub mod indicators;
pub mod ingest;
pub mod lexicon;
pub mod metrics;
pub mod nbayes;
pub mod pipeline;
pub mod preprocess;
pub mod signals;
pub mod types;

pub use ingest::{Candle, NewsRecord, PriceSeries, Timeframe};
pub use lexicon::{Lexicon, LexiconConfig};
pub use nbayes::{NBConfig, NBModel};
pub use preprocess::{ProcessedDoc, StopwordSet};
pub use signals::{FusionConfig, TradingSignal};
pub use types::{ClassLabel, Engine, Prediction, SentimentScore};
