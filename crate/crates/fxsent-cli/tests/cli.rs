//! End-to-end tests of the `fxsent` binary: stage chaining, help surface,
//! determinism, and error reporting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fxsent"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data(rel: &str) -> String {
    repo_root().join(rel).display().to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn help_documents_every_subcommand_and_flag() {
    let output = run(&["--help"]);
    assert_ok(&output);
    let text = String::from_utf8_lossy(&output.stdout);
    for subcommand in [
        "train", "score", "signals", "backtest", "evaluate", "pipeline",
    ] {
        assert!(
            text.contains(subcommand),
            "missing {subcommand} in:\n{text}"
        );
    }

    for (subcommand, flags) in [
        (
            "train",
            vec![
                "--news",
                "--stopwords",
                "--out",
                "--min-count",
                "--rejection-threshold",
            ],
        ),
        (
            "score",
            vec![
                "--engine",
                "--lexicon",
                "--model",
                "--alpha",
                "--pos-threshold",
            ],
        ),
        (
            "signals",
            vec![
                "--prices",
                "--timeframe",
                "--sma-period",
                "--rsi-period",
                "--sentiment-window-hours",
                "--min-docs",
            ],
        ),
        (
            "backtest",
            vec![
                "--signals",
                "--slippage-per-side",
                "--max-hold-bars",
                "--fee-per-side",
                "--equity-csv",
            ],
        ),
        ("evaluate", vec!["--out-json", "--out-text"]),
        (
            "pipeline",
            vec![
                "--config",
                "--out-dir",
                "--strong-threshold",
                "--variance-floor-scale",
            ],
        ),
    ] {
        let output = run(&[subcommand, "--help"]);
        assert_ok(&output);
        let text = String::from_utf8_lossy(&output.stdout);
        for flag in flags {
            assert!(
                text.contains(flag),
                "{subcommand} --help missing {flag}:\n{text}"
            );
        }
    }
}

#[test]
fn unknown_flags_are_hard_errors() {
    let output = run(&["score", "--bogus-flag", "x"]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--bogus-flag"), "{stderr}");
}

#[test]
fn stage_chain_train_score_signals_backtest_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("model.txt");
    let scores = tmp.path().join("scores.csv");
    let signals = tmp.path().join("signals.csv");
    let report_json = tmp.path().join("report.json");
    let report_text = tmp.path().join("report.txt");
    let equity = tmp.path().join("equity.csv");
    let metrics_text = tmp.path().join("metrics.txt");

    let output = run(&[
        "train",
        "--news",
        &data("data/sample/news_usdcad.csv"),
        "--stopwords",
        &data("data/stopwords.txt"),
        "--pair",
        "USDCAD",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_ok(&output);
    assert!(String::from_utf8_lossy(&output.stdout).contains("trained on"));
    assert!(model.exists());

    let output = run(&[
        "score",
        "--news",
        &data("data/sample/news_usdcad.csv"),
        "--stopwords",
        &data("data/stopwords.txt"),
        "--pair",
        "USDCAD",
        "--engine",
        "nbayes",
        "--model",
        model.to_str().unwrap(),
        "--out",
        scores.to_str().unwrap(),
    ]);
    assert_ok(&output);
    let scores_text = std::fs::read_to_string(&scores).unwrap();
    assert!(scores_text.starts_with("timestamp,pair,weight,engine,score,predicted\n"));
    assert!(scores_text.contains(",nbayes,"));

    let output = run(&[
        "signals",
        "--news",
        &data("data/sample/news_usdcad.csv"),
        "--prices",
        &data("data/sample/usdcad_d1.csv"),
        "--stopwords",
        &data("data/stopwords.txt"),
        "--pair",
        "USDCAD",
        "--timeframe",
        "D1",
        "--engine",
        "nbayes",
        "--model",
        model.to_str().unwrap(),
        "--out",
        signals.to_str().unwrap(),
    ]);
    assert_ok(&output);
    let signals_text = std::fs::read_to_string(&signals).unwrap();
    assert!(signals_text
        .starts_with("timestamp,pair,direction,strength,sentiment,close,sma,rsi,doc_count\n"));
    assert!(
        signals_text.contains(",buy,"),
        "expected at least one buy signal"
    );

    let output = run(&[
        "backtest",
        "--prices",
        &data("data/sample/usdcad_d1.csv"),
        "--pair",
        "USDCAD",
        "--timeframe",
        "D1",
        "--signals",
        signals.to_str().unwrap(),
        "--out-json",
        report_json.to_str().unwrap(),
        "--out-text",
        report_text.to_str().unwrap(),
        "--equity-csv",
        equity.to_str().unwrap(),
    ]);
    assert_ok(&output);
    let text = std::fs::read_to_string(&report_text).unwrap();
    assert!(text.contains("Backtest report for USDCAD"), "{text}");
    assert!(text.contains("cumulative return"), "{text}");
    let json = std::fs::read_to_string(&report_json).unwrap();
    assert!(json.contains("\"trade_count\""));
    assert!(std::fs::read_to_string(&equity)
        .unwrap()
        .starts_with("timestamp,equity\n"));

    let output = run(&[
        "evaluate",
        "--news",
        &data("data/sample/news_usdcad.csv"),
        "--stopwords",
        &data("data/stopwords.txt"),
        "--pair",
        "USDCAD",
        "--engine",
        "nbayes",
        "--model",
        model.to_str().unwrap(),
        "--out-text",
        metrics_text.to_str().unwrap(),
    ]);
    assert_ok(&output);
    let text = std::fs::read_to_string(&metrics_text).unwrap();
    assert!(text.contains("macro"), "{text}");
    assert!(text.contains("coverage"), "{text}");
}

#[test]
fn pipeline_from_config_file_with_flag_override_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.conf");
    std::fs::write(
        &config,
        format!(
            "# sample run\n\
             news = {news}\n\
             prices = {prices}\n\
             stopwords = {stops}\n\
             lexicon = {lex}\n\
             engine = lexicon\n\
             pair = USDCAD\n\
             timeframe = D1\n\
             sma_period = 40\n",
            news = data("data/sample/news_usdcad.csv"),
            prices = data("data/sample/usdcad_d1.csv"),
            stops = data("data/stopwords.txt"),
            lex = data("data/lexicon.tsv"),
        ),
    )
    .unwrap();

    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "pipeline",
            "--config",
            config.to_str().unwrap(),
            "--sma-period",
            "50", // flag overrides the config file's 40
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_ok(&output);
        let stdout = String::from_utf8_lossy(&output.stdout);
        assert!(stdout.contains("backtest:"), "{stdout}");
        assert!(stdout.contains("metrics: accuracy"), "{stdout}");
    }

    let mut names: Vec<_> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let a = std::fs::read(out_a.join(&name)).unwrap();
        let b = std::fs::read(out_b.join(&name)).unwrap();
        assert_eq!(a, b, "artifact {name:?} differs between runs");
    }

    // The flag override took effect: a 50-bar SMA leaves 121 defined rows
    // over the 170-bar fixture (vs 131 with the config file's 40).
    let signals = std::fs::read_to_string(out_a.join("signals.csv")).unwrap();
    assert_eq!(signals.lines().count() - 1, 121);
}

#[test]
fn empty_news_yields_all_none_signals_and_zero_trades() {
    let tmp = tempfile::tempdir().unwrap();
    let news = tmp.path().join("empty.csv");
    std::fs::write(&news, "timestamp,source,pair,weight,label,text\n").unwrap();
    let out = tmp.path().join("out");

    let output = run(&[
        "pipeline",
        "--news",
        news.to_str().unwrap(),
        "--prices",
        &data("data/sample/usdcad_d1.csv"),
        "--stopwords",
        &data("data/stopwords.txt"),
        "--lexicon",
        &data("data/lexicon.tsv"),
        "--engine",
        "lexicon",
        "--pair",
        "USDCAD",
        "--timeframe",
        "D1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_ok(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("backtest: 0 trades"), "{stdout}");
    assert!(stdout.contains("metrics: skipped (no labels"), "{stdout}");

    let signals = std::fs::read_to_string(out.join("signals.csv")).unwrap();
    let mut rows = signals.lines().skip(1).peekable();
    assert!(
        rows.peek().is_some(),
        "signal rows expected even without news"
    );
    for row in rows {
        assert!(row.contains(",none,"), "non-none row: {row}");
    }
}

#[test]
fn missing_input_file_fails_with_path_in_error() {
    let tmp = tempfile::tempdir().unwrap();
    let output = run(&[
        "pipeline",
        "--news",
        &data("data/sample/news_usdcad.csv"),
        "--prices",
        &data("data/sample/usdcad_d1.csv"),
        "--stopwords",
        &data("data/stopwords.txt"),
        "--lexicon",
        "data/no_such_lexicon.tsv",
        "--engine",
        "lexicon",
        "--pair",
        "USDCAD",
        "--out-dir",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("no_such_lexicon.tsv"), "{stderr}");
}

#[test]
fn nbayes_without_model_flag_is_a_clear_error() {
    let output = run(&[
        "score",
        "--news",
        &data("data/sample/news_usdcad.csv"),
        "--stopwords",
        &data("data/stopwords.txt"),
        "--engine",
        "nbayes",
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--model"), "{stderr}");
}
