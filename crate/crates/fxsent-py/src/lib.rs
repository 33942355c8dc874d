//! Python bindings for the fxsent pipeline: preprocessing, both sentiment
//! engines, the SMA/RSI indicators, signal fusion and the end-to-end run.
//!
//! Build with `cargo build -p fxsent-py --release` and import the produced
//! `fxsent_py` module (see `python/smoke_test.py` for the loading dance), or
//! use maturin to build a wheel.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use fxsent::lexicon::LexiconConfig;
use fxsent::nbayes::NBConfig;
use fxsent::pipeline::{config_from_map, directional_count, run_pipeline};
use fxsent::preprocess::{ProcessedDoc, StopwordSet};
use fxsent::signals::{FusionConfig, SignalContext};
use fxsent::types::{ClassLabel, Engine, Prediction, SentimentScore};

fn value_err(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn io_err(err: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(err.to_string())
}

fn doc_from_tokens(tokens: Vec<String>) -> ProcessedDoc {
    ProcessedDoc { tokens }
}

/// Lowercase, strip mentions/links/hashtags, drop punctuation, collapse
/// whitespace.
#[pyfunction]
fn normalize(text: &str) -> String {
    fxsent::preprocess::normalize(text)
}

/// Normalize then split into tokens, dropping the given stop words.
#[pyfunction]
#[pyo3(signature = (text, stopwords = vec![]))]
fn tokenize(text: &str, stopwords: Vec<String>) -> Vec<String> {
    let stops = StopwordSet::from_words(stopwords);
    fxsent::preprocess::process(text, &stops).tokens
}

/// Load a stop-word file (one token per line, `#` comments) as a sorted list.
#[pyfunction]
fn load_stopwords(path: PathBuf) -> PyResult<Vec<String>> {
    let stops = StopwordSet::load(&path).map_err(io_err)?;
    let mut words: Vec<String> = stops.words().map(str::to_string).collect();
    words.sort();
    Ok(words)
}

/// Valence lexicon scorer.
#[pyclass]
struct Lexicon {
    inner: fxsent::Lexicon,
}

#[pymethods]
impl Lexicon {
    /// Load a `token<TAB>valence` file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Lexicon> {
        Ok(Lexicon {
            inner: fxsent::Lexicon::load(path).map_err(io_err)?,
        })
    }

    #[staticmethod]
    fn from_entries(entries: Vec<(String, f64)>) -> PyResult<Lexicon> {
        Ok(Lexicon {
            inner: fxsent::Lexicon::from_entries(entries).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn valence(&self, token: &str) -> Option<f64> {
        self.inner.valence(token)
    }

    /// Normalized polarity of a token sequence: s / sqrt(s^2 + alpha).
    #[pyo3(signature = (tokens, alpha = 15.0))]
    fn polarity_score(&self, tokens: Vec<String>, alpha: f64) -> PyResult<f64> {
        let config = LexiconConfig {
            alpha,
            ..LexiconConfig::default()
        };
        config.validate().map_err(value_err)?;
        let doc = doc_from_tokens(tokens);
        Ok(fxsent::lexicon::polarity_score(&doc, &self.inner, &config).value())
    }
}

/// Classify a polarity value against the neutral band.
#[pyfunction]
#[pyo3(signature = (value, pos_threshold = 0.05, neg_threshold = -0.05))]
fn classify_polarity(value: f64, pos_threshold: f64, neg_threshold: f64) -> PyResult<String> {
    let config = LexiconConfig {
        pos_threshold,
        neg_threshold,
        ..LexiconConfig::default()
    };
    config.validate().map_err(value_err)?;
    let score = SentimentScore::new(value, Engine::Lexicon).map_err(value_err)?;
    Ok(fxsent::lexicon::classify_polarity(score, &config).to_string())
}

/// Weighted average of (score, weight) pairs.
#[pyfunction]
fn aggregate_sentiment(values: Vec<f64>, weights: Vec<f64>) -> PyResult<f64> {
    if values.len() != weights.len() {
        return Err(value_err("values and weights differ in length"));
    }
    let scored: Vec<(SentimentScore, f64)> = values
        .into_iter()
        .zip(weights)
        .map(|(v, w)| {
            Ok((
                SentimentScore::new(v, Engine::Lexicon).map_err(value_err)?,
                w,
            ))
        })
        .collect::<PyResult<_>>()?;
    Ok(fxsent::lexicon::aggregate_sentiment(&scored)
        .map_err(value_err)?
        .value())
}

/// Gaussian Naive Bayes sentiment model with rejection.
#[pyclass]
struct NBModel {
    inner: fxsent::NBModel,
}

#[pymethods]
impl NBModel {
    /// Train from token lists and parallel labels
    /// ("negative" | "neutral" | "positive").
    #[staticmethod]
    #[pyo3(signature = (docs, labels, min_count = 2, variance_floor_scale = 1e-9, rejection_threshold = 0.5))]
    fn train(
        docs: Vec<Vec<String>>,
        labels: Vec<String>,
        min_count: usize,
        variance_floor_scale: f64,
        rejection_threshold: f64,
    ) -> PyResult<NBModel> {
        if docs.len() != labels.len() {
            return Err(value_err("docs and labels differ in length"));
        }
        let labeled: Vec<(ProcessedDoc, ClassLabel)> = docs
            .into_iter()
            .zip(labels)
            .map(|(tokens, label)| {
                Ok((
                    doc_from_tokens(tokens),
                    label.parse::<ClassLabel>().map_err(value_err)?,
                ))
            })
            .collect::<PyResult<_>>()?;
        let config = NBConfig {
            min_count,
            variance_floor_scale,
            rejection_threshold,
        };
        Ok(NBModel {
            inner: fxsent::nbayes::train(&labeled, config).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<NBModel> {
        Ok(NBModel {
            inner: fxsent::NBModel::load(path).map_err(io_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(io_err)
    }

    fn vocabulary(&self) -> Vec<String> {
        self.inner.vocabulary().tokens().to_vec()
    }

    /// (P(negative), P(neutral), P(positive)) for a token sequence.
    fn posterior(&self, tokens: Vec<String>) -> PyResult<(f64, f64, f64)> {
        let features = fxsent::nbayes::featurize(&doc_from_tokens(tokens), self.inner.vocabulary());
        let p = self.inner.posterior(&features).map_err(value_err)?;
        Ok((p[0], p[1], p[2]))
    }

    /// Class name, or None when the winning posterior does not clear the
    /// rejection threshold.
    fn classify(&self, tokens: Vec<String>) -> PyResult<Option<String>> {
        let features = fxsent::nbayes::featurize(&doc_from_tokens(tokens), self.inner.vocabulary());
        match self.inner.classify(&features).map_err(value_err)? {
            Prediction::Class(label) => Ok(Some(label.to_string())),
            Prediction::Rejected => Ok(None),
        }
    }

    /// P(positive) - P(negative).
    fn sentiment_score(&self, tokens: Vec<String>) -> PyResult<f64> {
        let features = fxsent::nbayes::featurize(&doc_from_tokens(tokens), self.inner.vocabulary());
        Ok(self
            .inner
            .sentiment_score(&features)
            .map_err(value_err)?
            .value())
    }
}

/// Simple moving average over closes; values start at index period-1.
#[pyfunction]
fn sma(closes: Vec<f64>, period: usize) -> PyResult<Vec<f64>> {
    fxsent::indicators::sma(&closes, period).map_err(value_err)
}

/// Wilder RSI over closes; values start at index period.
#[pyfunction]
#[pyo3(signature = (closes, period = 14))]
fn rsi(closes: Vec<f64>, period: usize) -> PyResult<Vec<f64>> {
    fxsent::indicators::rsi(&closes, period).map_err(value_err)
}

/// Fusion rule for one bar. Returns (direction, strength) where strength is
/// None when no signal is issued.
#[pyfunction]
#[pyo3(signature = (
    sentiment, doc_count, close, sma, rsi,
    pos_threshold = 0.05, neg_threshold = -0.05, strong_threshold = 0.5, min_docs = 1
))]
#[allow(clippy::too_many_arguments)]
fn generate_signal(
    sentiment: f64,
    doc_count: usize,
    close: f64,
    sma: f64,
    rsi: f64,
    pos_threshold: f64,
    neg_threshold: f64,
    strong_threshold: f64,
    min_docs: usize,
) -> PyResult<(String, Option<String>)> {
    let config = FusionConfig {
        pos_threshold,
        neg_threshold,
        strong_threshold,
        min_docs,
        ..FusionConfig::default()
    };
    config.validate().map_err(value_err)?;
    let ctx = SignalContext {
        timestamp: chrono::DateTime::UNIX_EPOCH,
        pair: String::new(),
        sentiment: SentimentScore::new(sentiment, Engine::Lexicon).map_err(value_err)?,
        doc_count,
        close,
        sma_value: sma,
        rsi_value: rsi,
    };
    let signal = fxsent::signals::generate_signal(&ctx, &config);
    Ok((
        signal.direction.to_string(),
        signal.strength.map(|s| s.to_string()),
    ))
}

/// 2PR/(P+R), the harmonic mean of precision and recall.
#[pyfunction]
fn f1_score(precision: f64, recall: f64) -> f64 {
    fxsent::metrics::f1_score(precision, recall)
}

/// Run the full pipeline from a flat `key = value` config file, writing the
/// artifacts into `out_dir`. Returns a summary dict.
#[pyfunction]
fn run_pipeline_from_config(
    py: Python<'_>,
    config_path: PathBuf,
    out_dir: PathBuf,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let text = std::fs::read_to_string(&config_path).map_err(io_err)?;
    let map: BTreeMap<String, String> =
        fxsent::pipeline::parse_config_file(&text).map_err(value_err)?;
    let config = config_from_map(&map).map_err(value_err)?;
    let summary = run_pipeline(&config, Path::new(&out_dir)).map_err(value_err)?;

    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("documents", summary.documents)?;
    dict.set_item("rejected_documents", summary.rejected_documents)?;
    dict.set_item("signal_rows", summary.signal_rows.len())?;
    dict.set_item(
        "directional_signals",
        directional_count(&summary.signal_rows),
    )?;
    dict.set_item("trade_count", summary.report.trade_count)?;
    dict.set_item(
        "cumulative_return_frac",
        summary.report.cumulative_return_frac,
    )?;
    dict.set_item(
        "artifacts",
        summary
            .artifacts
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    )?;
    Ok(dict.into())
}

#[pymodule]
fn fxsent_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(load_stopwords, m)?)?;
    m.add_function(wrap_pyfunction!(classify_polarity, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_sentiment, m)?)?;
    m.add_function(wrap_pyfunction!(sma, m)?)?;
    m.add_function(wrap_pyfunction!(rsi, m)?)?;
    m.add_function(wrap_pyfunction!(generate_signal, m)?)?;
    m.add_function(wrap_pyfunction!(f1_score, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline_from_config, m)?)?;
    m.add_class::<Lexicon>()?;
    m.add_class::<NBModel>()?;
    Ok(())
}
