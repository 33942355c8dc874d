//! `fxsent` — news/post sentiment to Forex trading signals, end to end.
//!
//! Each pipeline stage is independently runnable (`train`, `score`,
//! `signals`, `backtest`, `evaluate`); `pipeline` chains them and writes all
//! artifacts into an output directory. Runs are deterministic: the same
//! inputs always produce byte-identical outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fxsent::backtest::{run_backtest, BacktestConfig};
use fxsent::indicators::{rsi_series, sma_series};
use fxsent::ingest::Timeframe;
use fxsent::lexicon::LexiconConfig;
use fxsent::nbayes::{train, NBConfig};
use fxsent::pipeline::{
    accepted_scored_docs, config_from_map, directional_count, evaluate_documents,
    labeled_training_set, load_lexicon, load_model, load_news, load_prices, open_input,
    parse_config_file, run_pipeline, score_documents, write_scores_csv, DocScore, ScoringEngine,
};
use fxsent::preprocess::{process, ProcessedDoc, StopwordSet};
use fxsent::signals::{generate_signal_rows, read_signals_csv, write_signals_csv, FusionConfig};
use fxsent::types::Engine;
use fxsent::NewsRecord;

#[derive(Parser)]
#[command(
    name = "fxsent",
    version,
    about = "Sentiment-driven Forex trading signals: score news, confirm with SMA/RSI, backtest",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the Gaussian Naive Bayes sentiment model from labeled news
    Train(TrainArgs),
    /// Score each news document with a sentiment engine
    Score(ScoreArgs),
    /// Generate per-bar trading signals from news plus prices
    Signals(SignalsArgs),
    /// Replay a signals CSV against prices and report returns
    Backtest(BacktestArgs),
    /// Evaluate engine predictions against gold labels
    Evaluate(EvaluateArgs),
    /// Run the whole pipeline and write all artifacts
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// News CSV (timestamp,source,pair,weight,label,text)
    #[arg(long)]
    news: PathBuf,
    /// Stop-word file, one token per line
    #[arg(long)]
    stopwords: PathBuf,
    /// Keep only rows for this currency pair (e.g. USDCAD)
    #[arg(long)]
    pair: Option<String>,
}

impl CorpusArgs {
    fn load(&self) -> Result<(Vec<NewsRecord>, Vec<ProcessedDoc>)> {
        let stopwords = StopwordSet::load(&self.stopwords)
            .with_context(|| format!("loading stop words from {}", self.stopwords.display()))?;
        let mut records = load_news(&self.news)?;
        if let Some(pair) = &self.pair {
            records.retain(|r| r.pair.eq_ignore_ascii_case(pair));
        }
        let docs = records
            .iter()
            .map(|r| process(&r.text, &stopwords))
            .collect();
        Ok((records, docs))
    }
}

#[derive(Args)]
struct EngineArgs {
    /// Sentiment engine: lexicon | nbayes
    #[arg(long)]
    engine: Engine,
    /// Lexicon file (token<TAB>valence); required for the lexicon engine
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Trained model file; required for the nbayes engine
    #[arg(long)]
    model: Option<PathBuf>,
    /// Normalization smoothing factor of the lexicon score
    #[arg(long, default_value_t = 15.0)]
    alpha: f64,
    /// Polarity at or above which a document counts as positive
    #[arg(long, default_value_t = 0.05)]
    pos_threshold: f64,
    /// Polarity at or below which a document counts as negative
    #[arg(long, default_value_t = -0.05, allow_negative_numbers = true)]
    neg_threshold: f64,
}

impl EngineArgs {
    fn build(&self) -> Result<ScoringEngine> {
        match self.engine {
            Engine::Lexicon => {
                let Some(path) = &self.lexicon else {
                    bail!("--engine lexicon requires --lexicon <FILE>");
                };
                let config = LexiconConfig {
                    alpha: self.alpha,
                    pos_threshold: self.pos_threshold,
                    neg_threshold: self.neg_threshold,
                };
                config.validate()?;
                Ok(ScoringEngine::Lexicon {
                    lexicon: load_lexicon(path)?,
                    config,
                })
            }
            Engine::NBayes => {
                let Some(path) = &self.model else {
                    bail!("--engine nbayes requires --model <FILE> (run `fxsent train` first)");
                };
                Ok(ScoringEngine::NBayes {
                    model: Box::new(load_model(path)?),
                })
            }
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Where to write the model file
    #[arg(long)]
    out: PathBuf,
    /// Minimum corpus occurrences for a vocabulary token
    #[arg(long, default_value_t = 2)]
    min_count: usize,
    /// Variance floor as a fraction of the largest pooled feature variance
    #[arg(long, default_value_t = 1e-9)]
    variance_floor_scale: f64,
    /// Minimum winning posterior to accept a classification
    #[arg(long, default_value_t = 0.5)]
    rejection_threshold: f64,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SignalsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// OHLC price CSV (Date,Price,Open,High,Low,Vol.,Change %)
    #[arg(long)]
    prices: PathBuf,
    /// Bar timeframe the price file represents: H4 | D1 | MN
    #[arg(long, default_value = "H4")]
    timeframe: Timeframe,
    /// SMA confirmation period in bars
    #[arg(long, default_value_t = 50)]
    sma_period: usize,
    /// RSI period in bars
    #[arg(long, default_value_t = 14)]
    rsi_period: usize,
    /// |sentiment| at or above which an issued signal grades Strong
    #[arg(long, default_value_t = 0.5)]
    strong_threshold: f64,
    /// Sentiment lookback window in hours, ending at each bar close
    #[arg(long, default_value_t = 24)]
    sentiment_window_hours: i64,
    /// Minimum documents in window for sentiment to count
    #[arg(long, default_value_t = 1)]
    min_docs: usize,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BacktestArgs {
    /// OHLC price CSV
    #[arg(long)]
    prices: PathBuf,
    /// Currency pair code of the price file
    #[arg(long)]
    pair: String,
    /// Bar timeframe: H4 | D1 | MN
    #[arg(long, default_value = "H4")]
    timeframe: Timeframe,
    /// Signals CSV produced by `fxsent signals` or `fxsent pipeline`
    #[arg(long)]
    signals: PathBuf,
    /// Adverse price offset per side, in price units
    #[arg(long, default_value_t = 0.0)]
    slippage_per_side: f64,
    /// Forced exit after this many bars
    #[arg(long, default_value_t = 42)]
    max_hold_bars: usize,
    /// Fee per side as a fraction of notional
    #[arg(long, default_value_t = 0.0)]
    fee_per_side: f64,
    /// Write the JSON report here
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Write the text report here (stdout when omitted)
    #[arg(long)]
    out_text: Option<PathBuf>,
    /// Write the equity curve CSV here
    #[arg(long)]
    equity_csv: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Write the JSON metrics report here
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Write the text metrics table here (stdout when omitted)
    #[arg(long)]
    out_text: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Flat `key = value` config file; flags below override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the output artifacts
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    news: Option<String>,
    #[arg(long)]
    prices: Option<String>,
    #[arg(long)]
    stopwords: Option<String>,
    #[arg(long)]
    lexicon: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    pair: Option<String>,
    #[arg(long)]
    timeframe: Option<String>,
    #[arg(long)]
    sma_period: Option<usize>,
    #[arg(long)]
    rsi_period: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    pos_threshold: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    neg_threshold: Option<f64>,
    #[arg(long)]
    strong_threshold: Option<f64>,
    #[arg(long)]
    sentiment_window_hours: Option<i64>,
    #[arg(long)]
    min_docs: Option<usize>,
    #[arg(long)]
    min_count: Option<usize>,
    #[arg(long)]
    variance_floor_scale: Option<f64>,
    #[arg(long)]
    rejection_threshold: Option<f64>,
    #[arg(long)]
    slippage_per_side: Option<f64>,
    #[arg(long)]
    max_hold_bars: Option<usize>,
    #[arg(long)]
    fee_per_side: Option<f64>,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Score(args) => cmd_score(args),
        Command::Signals(args) => cmd_signals(args),
        Command::Backtest(args) => cmd_backtest(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

fn write_output(path: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => {
            let mut file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            file.write_all(bytes)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let (records, docs) = args.corpus.load()?;
    let labeled = labeled_training_set(&records, &docs);
    let config = NBConfig {
        min_count: args.min_count,
        variance_floor_scale: args.variance_floor_scale,
        rejection_threshold: args.rejection_threshold,
    };
    let model = train(&labeled, config)?;
    model
        .save(&args.out)
        .with_context(|| format!("writing model to {}", args.out.display()))?;
    println!(
        "trained on {} labeled documents, vocabulary {} tokens -> {}",
        labeled.len(),
        model.vocabulary().len(),
        args.out.display()
    );
    Ok(())
}

fn score_corpus(
    corpus: &CorpusArgs,
    engine: &EngineArgs,
) -> Result<(Vec<NewsRecord>, Vec<DocScore>)> {
    let (records, docs) = corpus.load()?;
    let engine = engine.build()?;
    let scores = score_documents(&records, &docs, &engine)?;
    Ok((records, scores))
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let (_, scores) = score_corpus(&args.corpus, &args.engine)?;
    let mut buf = Vec::new();
    write_scores_csv(&scores, &mut buf)?;
    write_output(&args.out, &buf)
}

fn cmd_signals(args: SignalsArgs) -> Result<()> {
    let Some(pair) = args.corpus.pair.clone() else {
        bail!("--pair is required for signal generation");
    };
    let (_, scores) = score_corpus(&args.corpus, &args.engine)?;
    let scored = accepted_scored_docs(&scores);

    let series = load_prices(&args.prices, &pair, args.timeframe)?;
    let sma = sma_series(&series, args.sma_period)?;
    let rsi = rsi_series(&series, args.rsi_period)?;
    let fusion = FusionConfig {
        pos_threshold: args.engine.pos_threshold,
        neg_threshold: args.engine.neg_threshold,
        strong_threshold: args.strong_threshold,
        sentiment_window: chrono_hours(args.sentiment_window_hours)?,
        min_docs: args.min_docs,
    };
    let rows = generate_signal_rows(&series, &scored, &sma, &rsi, &fusion, args.engine.engine)?;
    let mut buf = Vec::new();
    write_signals_csv(&rows, &mut buf)?;
    write_output(&args.out, &buf)
}

fn chrono_hours(hours: i64) -> Result<chrono::Duration> {
    if hours < 1 {
        bail!("sentiment window must be at least 1 hour, got {hours}");
    }
    Ok(chrono::Duration::hours(hours))
}

fn cmd_backtest(args: BacktestArgs) -> Result<()> {
    let series = load_prices(&args.prices, &args.pair, args.timeframe)?;
    let file = open_input(&args.signals)?;
    let signals = read_signals_csv(file)
        .with_context(|| format!("reading signals from {}", args.signals.display()))?;
    let config = BacktestConfig {
        slippage_per_side: args.slippage_per_side,
        max_hold_bars: args.max_hold_bars,
        fee_per_side: args.fee_per_side,
    };
    let report = run_backtest(&series, &signals, &config)?;
    if let Some(path) = &args.out_json {
        write_output(&Some(path.clone()), report.to_json()?.as_bytes())?;
    }
    if let Some(path) = &args.equity_csv {
        write_output(&Some(path.clone()), report.equity_csv().as_bytes())?;
    }
    write_output(&args.out_text, report.to_text().as_bytes())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (records, scores) = score_corpus(&args.corpus, &args.engine)?;
    let Some((matrix, report)) = evaluate_documents(&records, &scores)? else {
        bail!("no labeled rows in {}", args.corpus.news.display());
    };
    let Some(report) = report else {
        bail!(
            "all {} labeled documents were rejected; nothing to evaluate",
            matrix.abstentions
        );
    };
    if let Some(path) = &args.out_json {
        write_output(&Some(path.clone()), report.to_json().as_bytes())?;
    }
    let mut text = report.to_text();
    text.push_str(&format!("abstentions {}\n", matrix.abstentions));
    write_output(&args.out_text, text.as_bytes())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let mut map: BTreeMap<String, String> = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };

    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    };
    set("news", args.news);
    set("prices", args.prices);
    set("stopwords", args.stopwords);
    set("lexicon", args.lexicon);
    set("model", args.model);
    set("engine", args.engine);
    set("pair", args.pair);
    set("timeframe", args.timeframe);
    set("sma_period", args.sma_period.map(|v| v.to_string()));
    set("rsi_period", args.rsi_period.map(|v| v.to_string()));
    set("alpha", args.alpha.map(|v| v.to_string()));
    set("pos_threshold", args.pos_threshold.map(|v| v.to_string()));
    set("neg_threshold", args.neg_threshold.map(|v| v.to_string()));
    set(
        "strong_threshold",
        args.strong_threshold.map(|v| v.to_string()),
    );
    set(
        "sentiment_window_hours",
        args.sentiment_window_hours.map(|v| v.to_string()),
    );
    set("min_docs", args.min_docs.map(|v| v.to_string()));
    set("min_count", args.min_count.map(|v| v.to_string()));
    set(
        "variance_floor_scale",
        args.variance_floor_scale.map(|v| v.to_string()),
    );
    set(
        "rejection_threshold",
        args.rejection_threshold.map(|v| v.to_string()),
    );
    set(
        "slippage_per_side",
        args.slippage_per_side.map(|v| v.to_string()),
    );
    set("max_hold_bars", args.max_hold_bars.map(|v| v.to_string()));
    set("fee_per_side", args.fee_per_side.map(|v| v.to_string()));

    let config = config_from_map(&map)?;
    let summary = run_pipeline(&config, &args.out_dir)?;

    println!(
        "documents: {} ({} rejected)",
        summary.documents, summary.rejected_documents
    );
    println!(
        "signals: {} rows, {} directional",
        summary.signal_rows.len(),
        directional_count(&summary.signal_rows)
    );
    println!(
        "backtest: {} trades, cumulative return {:+.4}%",
        summary.report.trade_count,
        summary.report.cumulative_return_frac * 100.0
    );
    match &summary.metrics {
        Some(metrics) => println!(
            "metrics: accuracy {:.2}%, macro F1 {:.2}, coverage {:.2}",
            metrics.accuracy * 100.0,
            metrics.macro_f1,
            metrics.coverage
        ),
        None if summary.abstentions > 0 => {
            println!(
                "metrics: skipped ({} labeled documents, all rejected)",
                summary.abstentions
            )
        }
        None => println!("metrics: skipped (no labels in news file)"),
    }
    for artifact in &summary.artifacts {
        println!("wrote {}", artifact.display());
    }
    Ok(())
}
