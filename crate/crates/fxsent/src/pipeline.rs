//! End-to-end orchestration: parse inputs, preprocess, score per document,
//! aggregate per bar, confirm with indicators, fuse, backtest, evaluate, and
//! write the output artifacts. Also home of the flat `key = value` config
//! format the CLI consumes.
//!
//! Everything here is deterministic: two runs over identical inputs produce
//! byte-identical artifacts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use thiserror::Error;

use crate::backtest::{run_backtest, BacktestConfig, BacktestError, BacktestReport};
use crate::indicators::{rsi_series, sma_series, IndicatorError};
use crate::ingest::{
    parse_news_csv, parse_ohlc_csv, IngestError, NewsRecord, PriceSeries, Timeframe,
};
use crate::lexicon::{classify_polarity, polarity_score, Lexicon, LexiconConfig, LexiconError};
use crate::metrics::{compute_metrics, confusion, ConfusionMatrix, MetricsError, MetricsReport};
use crate::nbayes::{featurize, train, NBConfig, NBModel, NBayesError};
use crate::preprocess::{process, PreprocessError, ProcessedDoc, StopwordSet};
use crate::signals::{
    generate_signal_rows, write_signals_csv, Direction, FusionConfig, ScoredDoc, SignalError,
    SignalRow,
};
use crate::types::{ClassLabel, Engine, Prediction, SentimentScore};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("ingest: failed to open {path}")]
    OpenInput {
        path: String,
        source: std::io::Error,
    },
    #[error("ingest: {path}")]
    Ingest { path: String, source: IngestError },
    #[error(transparent)]
    Stopwords(#[from] PreprocessError),
    #[error("lexicon: {path}")]
    LexiconLoad { path: String, source: LexiconError },
    #[error("nbayes: model {path}")]
    ModelLoad { path: String, source: NBayesError },
    #[error(transparent)]
    NBayes(#[from] NBayesError),
    #[error("indicators: {which}")]
    Indicator {
        which: &'static str,
        source: IndicatorError,
    },
    #[error(transparent)]
    Signals(#[from] SignalError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("failed to write {path}")]
    WriteArtifact {
        path: String,
        source: std::io::Error,
    },
}

/// Fully resolved pipeline parameters.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub news: PathBuf,
    pub prices: PathBuf,
    pub stopwords: PathBuf,
    /// Lexicon file; required when `engine` is `lexicon`.
    pub lexicon: Option<PathBuf>,
    /// Pre-trained model file; when absent and `engine` is `nbayes`, the
    /// pipeline trains on the labeled rows of the news file.
    pub model: Option<PathBuf>,
    pub engine: Engine,
    pub pair: String,
    pub timeframe: Timeframe,
    pub sma_period: usize,
    pub rsi_period: usize,
    pub lexicon_config: LexiconConfig,
    pub nb_config: NBConfig,
    pub fusion: FusionConfig,
    pub backtest: BacktestConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.pair.trim().is_empty() {
            return Err(PipelineError::Config("pair must be nonempty".into()));
        }
        if self.sma_period < 1 || self.rsi_period < 1 {
            return Err(PipelineError::Config(
                "sma_period and rsi_period must be >= 1".into(),
            ));
        }
        if self.engine == Engine::Lexicon && self.lexicon.is_none() {
            return Err(PipelineError::Config(
                "engine lexicon requires a `lexicon` file path".into(),
            ));
        }
        self.lexicon_config
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.nb_config
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.fusion
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.backtest
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }
}

/// All keys the flat config file / CLI flags understand.
pub const CONFIG_KEYS: [&str; 22] = [
    "news",
    "prices",
    "stopwords",
    "lexicon",
    "model",
    "engine",
    "pair",
    "timeframe",
    "sma_period",
    "rsi_period",
    "alpha",
    "pos_threshold",
    "neg_threshold",
    "strong_threshold",
    "sentiment_window_hours",
    "min_docs",
    "min_count",
    "variance_floor_scale",
    "rejection_threshold",
    "slippage_per_side",
    "max_hold_bars",
    "fee_per_side",
];

/// Parses the flat `key = value` config format. `#` starts a comment line;
/// keys may not repeat; unknown keys are hard errors.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                i + 1
            ))
        })?;
        let key = key.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(PipelineError::Config(format!(
                "line {}: unknown key `{key}`",
                i + 1
            )));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(PipelineError::Config(format!(
                "line {}: duplicate key `{key}`",
                i + 1
            )));
        }
    }
    Ok(map)
}

fn parsed<T: FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, PipelineError> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| PipelineError::Config(format!("bad value `{raw}` for `{key}`"))),
    }
}

fn required(map: &BTreeMap<String, String>, key: &str) -> Result<String, PipelineError> {
    map.get(key)
        .cloned()
        .ok_or_else(|| PipelineError::Config(format!("missing required key `{key}`")))
}

/// Builds a [`PipelineConfig`] from a key/value map (config file contents,
/// with CLI flags already merged on top), applying defaults and rejecting
/// unknown keys.
pub fn config_from_map(map: &BTreeMap<String, String>) -> Result<PipelineConfig, PipelineError> {
    for key in map.keys() {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(PipelineError::Config(format!("unknown key `{key}`")));
        }
    }
    let engine: Engine = required(map, "engine")?
        .parse()
        .map_err(|e: crate::types::TypeError| PipelineError::Config(e.to_string()))?;
    let timeframe: Timeframe = parsed(map, "timeframe", Timeframe::H4)?;
    let window_hours: i64 = parsed(map, "sentiment_window_hours", 24)?;
    if window_hours <= 0 {
        return Err(PipelineError::Config(
            "sentiment_window_hours must be >= 1".into(),
        ));
    }

    let config = PipelineConfig {
        news: PathBuf::from(required(map, "news")?),
        prices: PathBuf::from(required(map, "prices")?),
        stopwords: PathBuf::from(required(map, "stopwords")?),
        lexicon: map.get("lexicon").map(PathBuf::from),
        model: map.get("model").map(PathBuf::from),
        engine,
        pair: required(map, "pair")?,
        timeframe,
        sma_period: parsed(map, "sma_period", 50)?,
        rsi_period: parsed(map, "rsi_period", 14)?,
        lexicon_config: LexiconConfig {
            alpha: parsed(map, "alpha", 15.0)?,
            pos_threshold: parsed(map, "pos_threshold", 0.05)?,
            neg_threshold: parsed(map, "neg_threshold", -0.05)?,
        },
        nb_config: NBConfig {
            min_count: parsed(map, "min_count", 2)?,
            variance_floor_scale: parsed(map, "variance_floor_scale", 1e-9)?,
            rejection_threshold: parsed(map, "rejection_threshold", 0.5)?,
        },
        fusion: FusionConfig {
            pos_threshold: parsed(map, "pos_threshold", 0.05)?,
            neg_threshold: parsed(map, "neg_threshold", -0.05)?,
            strong_threshold: parsed(map, "strong_threshold", 0.5)?,
            sentiment_window: Duration::hours(window_hours),
            min_docs: parsed(map, "min_docs", 1)?,
        },
        backtest: BacktestConfig {
            slippage_per_side: parsed(map, "slippage_per_side", 0.0)?,
            max_hold_bars: parsed(map, "max_hold_bars", 42)?,
            fee_per_side: parsed(map, "fee_per_side", 0.0)?,
        },
    };
    config.validate()?;
    Ok(config)
}

/// A loaded, ready-to-score sentiment engine.
pub enum ScoringEngine {
    Lexicon {
        lexicon: Lexicon,
        config: LexiconConfig,
    },
    NBayes {
        model: Box<NBModel>,
    },
}

impl ScoringEngine {
    pub fn engine(&self) -> Engine {
        match self {
            ScoringEngine::Lexicon { .. } => Engine::Lexicon,
            ScoringEngine::NBayes { .. } => Engine::NBayes,
        }
    }

    /// Scores one preprocessed document: a polarity value plus the class
    /// decision (which can be `Rejected` for the Bayes engine).
    pub fn score_doc(
        &self,
        doc: &ProcessedDoc,
    ) -> Result<(SentimentScore, Prediction), PipelineError> {
        match self {
            ScoringEngine::Lexicon { lexicon, config } => {
                let score = polarity_score(doc, lexicon, config);
                Ok((score, Prediction::Class(classify_polarity(score, config))))
            }
            ScoringEngine::NBayes { model } => {
                let features = featurize(doc, model.vocabulary());
                let posteriors = model.posterior(&features)?;
                Ok((
                    crate::nbayes::score_from_posteriors(posteriors),
                    crate::nbayes::decide(posteriors, model.config().rejection_threshold),
                ))
            }
        }
    }
}

/// One document's score row, aligned with the filtered news records.
#[derive(Debug, Clone, PartialEq)]
pub struct DocScore {
    pub timestamp: DateTime<Utc>,
    pub pair: String,
    pub weight: f64,
    pub score: SentimentScore,
    pub prediction: Prediction,
}

pub fn score_documents(
    records: &[NewsRecord],
    docs: &[ProcessedDoc],
    engine: &ScoringEngine,
) -> Result<Vec<DocScore>, PipelineError> {
    debug_assert_eq!(records.len(), docs.len());
    records
        .iter()
        .zip(docs)
        .map(|(record, doc)| {
            let (score, prediction) = engine.score_doc(doc)?;
            Ok(DocScore {
                timestamp: record.timestamp,
                pair: record.pair.clone(),
                weight: record.relevance_weight,
                score,
                prediction,
            })
        })
        .collect()
}

/// Per-document scores CSV (`timestamp,pair,weight,engine,score,predicted`).
pub fn write_scores_csv<W: Write>(rows: &[DocScore], writer: &mut W) -> Result<(), std::io::Error> {
    writeln!(writer, "timestamp,pair,weight,engine,score,predicted")?;
    for row in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            row.timestamp.format("%Y-%m-%dT%H:%M:%SZ"),
            row.pair,
            row.weight,
            row.score.engine(),
            row.score.value(),
            row.prediction
        )?;
    }
    Ok(())
}

/// Documents usable for window aggregation: everything the engine did not
/// reject.
pub fn accepted_scored_docs(rows: &[DocScore]) -> Vec<ScoredDoc> {
    rows.iter()
        .filter(|r| r.prediction != Prediction::Rejected)
        .map(|r| ScoredDoc {
            timestamp: r.timestamp,
            weight: r.weight,
            score: r.score,
        })
        .collect()
}

/// Confusion matrix + metrics of predictions against gold labels, over the
/// labeled subset of the corpus.
pub fn evaluate_documents(
    records: &[NewsRecord],
    rows: &[DocScore],
) -> Result<Option<(ConfusionMatrix, Option<MetricsReport>)>, PipelineError> {
    let mut predictions = Vec::new();
    let mut golds = Vec::new();
    for (record, row) in records.iter().zip(rows) {
        if let Some(gold) = record.label {
            predictions.push(row.prediction);
            golds.push(gold);
        }
    }
    if golds.is_empty() {
        return Ok(None);
    }
    let matrix = confusion(&predictions, &golds)?;
    // Every labeled prediction rejected: the matrix is empty and per-class
    // metrics are undefined; callers still get the abstention counts.
    let report = if matrix.total() > 0 {
        Some(compute_metrics(&matrix)?)
    } else {
        None
    };
    Ok(Some((matrix, report)))
}

pub fn open_input(path: &Path) -> Result<File, PipelineError> {
    File::open(path).map_err(|source| PipelineError::OpenInput {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_news(path: &Path) -> Result<Vec<NewsRecord>, PipelineError> {
    let file = open_input(path)?;
    parse_news_csv(file).map_err(|source| PipelineError::Ingest {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_prices(
    path: &Path,
    pair: &str,
    timeframe: Timeframe,
) -> Result<PriceSeries, PipelineError> {
    let file = open_input(path)?;
    parse_ohlc_csv(file, pair, timeframe).map_err(|source| PipelineError::Ingest {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, PipelineError> {
    Lexicon::load(path).map_err(|source| PipelineError::LexiconLoad {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<NBModel, PipelineError> {
    NBModel::load(path).map_err(|source| PipelineError::ModelLoad {
        path: path.display().to_string(),
        source,
    })
}

/// Labeled (document, class) pairs for training, positionally aligned.
pub fn labeled_training_set(
    records: &[NewsRecord],
    docs: &[ProcessedDoc],
) -> Vec<(ProcessedDoc, ClassLabel)> {
    records
        .iter()
        .zip(docs)
        .filter_map(|(record, doc)| record.label.map(|label| (doc.clone(), label)))
        .collect()
}

fn write_artifact(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(|source| PipelineError::WriteArtifact {
        path: path.display().to_string(),
        source,
    })
}

/// What one pipeline run produced.
#[derive(Debug)]
pub struct PipelineSummary {
    pub documents: usize,
    pub rejected_documents: usize,
    pub signal_rows: Vec<SignalRow>,
    pub report: BacktestReport,
    pub metrics: Option<MetricsReport>,
    pub abstentions: u64,
    pub artifacts: Vec<PathBuf>,
}

/// Runs the whole pipeline and writes the artifacts into `out_dir`:
/// `signals.csv`, `backtest_report.json`, `backtest_report.txt`,
/// `equity_curve.csv`, plus `metrics.json`/`metrics.txt` when the news file
/// carries labels, plus `model.txt` when the Bayes engine was trained here.
pub fn run_pipeline(
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<PipelineSummary, PipelineError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| PipelineError::WriteArtifact {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut artifacts = Vec::new();

    let stopwords = StopwordSet::load(&config.stopwords)?;
    let all_records = load_news(&config.news)?;
    let records: Vec<NewsRecord> = all_records
        .into_iter()
        .filter(|r| r.pair.eq_ignore_ascii_case(&config.pair))
        .collect();
    let docs: Vec<ProcessedDoc> = records
        .iter()
        .map(|r| process(&r.text, &stopwords))
        .collect();

    let engine = match config.engine {
        Engine::Lexicon => {
            let path = config.lexicon.as_ref().expect("validated");
            ScoringEngine::Lexicon {
                lexicon: load_lexicon(path)?,
                config: config.lexicon_config,
            }
        }
        Engine::NBayes => {
            let model = match &config.model {
                Some(path) => load_model(path)?,
                None => {
                    let labeled = labeled_training_set(&records, &docs);
                    let model = train(&labeled, config.nb_config)?;
                    let model_path = out_dir.join("model.txt");
                    write_artifact(&model_path, model.to_model_string().as_bytes())?;
                    artifacts.push(model_path);
                    model
                }
            };
            ScoringEngine::NBayes {
                model: Box::new(model),
            }
        }
    };

    let doc_scores = score_documents(&records, &docs, &engine)?;
    let scored = accepted_scored_docs(&doc_scores);
    let rejected_documents = doc_scores.len() - scored.len();

    let series = load_prices(&config.prices, &config.pair, config.timeframe)?;
    let sma =
        sma_series(&series, config.sma_period).map_err(|source| PipelineError::Indicator {
            which: "sma",
            source,
        })?;
    let rsi =
        rsi_series(&series, config.rsi_period).map_err(|source| PipelineError::Indicator {
            which: "rsi",
            source,
        })?;

    let signal_rows =
        generate_signal_rows(&series, &scored, &sma, &rsi, &config.fusion, config.engine)?;
    let signals_path = out_dir.join("signals.csv");
    let mut buf = Vec::new();
    write_signals_csv(&signal_rows, &mut buf)?;
    write_artifact(&signals_path, &buf)?;
    artifacts.push(signals_path);

    let report = run_backtest(&series, &signal_rows, &config.backtest)?;
    let json_path = out_dir.join("backtest_report.json");
    write_artifact(&json_path, report.to_json()?.as_bytes())?;
    artifacts.push(json_path);
    let text_path = out_dir.join("backtest_report.txt");
    write_artifact(&text_path, report.to_text().as_bytes())?;
    artifacts.push(text_path);
    let equity_path = out_dir.join("equity_curve.csv");
    write_artifact(&equity_path, report.equity_csv().as_bytes())?;
    artifacts.push(equity_path);

    let mut metrics = None;
    let mut abstentions = 0;
    if let Some((matrix, maybe_report)) = evaluate_documents(&records, &doc_scores)? {
        abstentions = matrix.abstentions;
        if let Some(metrics_report) = maybe_report {
            let metrics_json = out_dir.join("metrics.json");
            write_artifact(&metrics_json, metrics_report.to_json().as_bytes())?;
            artifacts.push(metrics_json);
            let metrics_text = out_dir.join("metrics.txt");
            write_artifact(&metrics_text, metrics_report.to_text().as_bytes())?;
            artifacts.push(metrics_text);
            metrics = Some(metrics_report);
        }
    }

    Ok(PipelineSummary {
        documents: doc_scores.len(),
        rejected_documents,
        signal_rows,
        report,
        metrics,
        abstentions,
        artifacts,
    })
}

/// Count of rows that carry an actionable direction.
pub fn directional_count(rows: &[SignalRow]) -> usize {
    rows.iter()
        .filter(|r| r.direction != Direction::None)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parses_and_rejects_unknown_keys() {
        let text = "# run config\nnews = a.csv\nprices = b.csv\n\nengine = lexicon\n";
        let map = parse_config_file(text).unwrap();
        assert_eq!(map.get("news").unwrap(), "a.csv");
        assert_eq!(map.len(), 3);

        assert!(parse_config_file("bogus_key = 1\n").is_err());
        assert!(parse_config_file("news a.csv\n").is_err());
        assert!(parse_config_file("news = a\nnews = b\n").is_err());
    }

    #[test]
    fn config_defaults_are_applied() {
        let mut map = BTreeMap::new();
        map.insert("news".to_string(), "n.csv".to_string());
        map.insert("prices".to_string(), "p.csv".to_string());
        map.insert("stopwords".to_string(), "s.txt".to_string());
        map.insert("lexicon".to_string(), "l.tsv".to_string());
        map.insert("engine".to_string(), "lexicon".to_string());
        map.insert("pair".to_string(), "USDCAD".to_string());
        let config = config_from_map(&map).unwrap();
        assert_eq!(config.sma_period, 50);
        assert_eq!(config.rsi_period, 14);
        assert_eq!(config.timeframe, Timeframe::H4);
        assert_eq!(config.lexicon_config.alpha, 15.0);
        assert_eq!(config.fusion.sentiment_window, Duration::hours(24));
        assert_eq!(config.backtest.max_hold_bars, 42);
        assert_eq!(config.nb_config.rejection_threshold, 0.5);
    }

    #[test]
    fn lexicon_engine_requires_lexicon_path() {
        let mut map = BTreeMap::new();
        map.insert("news".to_string(), "n.csv".to_string());
        map.insert("prices".to_string(), "p.csv".to_string());
        map.insert("stopwords".to_string(), "s.txt".to_string());
        map.insert("engine".to_string(), "lexicon".to_string());
        map.insert("pair".to_string(), "USDCAD".to_string());
        let err = config_from_map(&map).unwrap_err();
        assert!(err.to_string().contains("lexicon"), "{err}");
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut map = BTreeMap::new();
        map.insert("news".to_string(), "n.csv".to_string());
        map.insert("prices".to_string(), "p.csv".to_string());
        map.insert("stopwords".to_string(), "s.txt".to_string());
        map.insert("lexicon".to_string(), "l.tsv".to_string());
        map.insert("engine".to_string(), "lexicon".to_string());
        map.insert("pair".to_string(), "USDCAD".to_string());
        map.insert("sma_period".to_string(), "many".to_string());
        let err = config_from_map(&map).unwrap_err();
        assert!(err.to_string().contains("sma_period"), "{err}");
    }
}
