#!/usr/bin/env python3
"""Smoke test for the fxsent_py extension module.

Build the module first, then run this script:

    cargo build -p fxsent-py --release
    python3 python/smoke_test.py
"""
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / "release" / "libfxsent_py.so",
        REPO / "target" / "debug" / "libfxsent_py.so",
        REPO / "target" / "release" / "libfxsent_py.dylib",
        REPO / "target" / "debug" / "libfxsent_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p fxsent-py --release")
    stage = Path(tempfile.mkdtemp(prefix="fxsent_py_"))
    shutil.copy(built, stage / "fxsent_py.so")
    sys.path.insert(0, str(stage))
    import fxsent_py

    return fxsent_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    fx = load_module()

    # Preprocessing
    assert fx.normalize("@trader check https://x.co #USD Dollar UP!") == "check dollar up"
    assert fx.tokenize("The Dollar is UP!", ["the", "is"]) == ["dollar", "up"]
    stops = fx.load_stopwords(str(REPO / "data" / "stopwords.txt"))
    assert "the" in stops and len(stops) > 150

    # Lexicon engine
    unit = fx.Lexicon.from_entries([("up", 1.0)])
    approx(unit.polarity_score(["up"]), 0.25, 1e-12)  # 1/sqrt(1+15)
    lex = fx.Lexicon.load(str(REPO / "data" / "lexicon.tsv"))
    assert len(lex) > 700
    assert lex.valence("boosting") > 0
    pos = lex.polarity_score(["rally", "surge", "strong"])
    assert pos > 0.5
    assert fx.classify_polarity(pos) == "positive"
    assert fx.classify_polarity(0.0) == "neutral"
    approx(fx.aggregate_sentiment([0.8, -0.4], [3.0, 1.0]), 0.5, 1e-12)

    # Naive Bayes engine
    docs = []
    labels = []
    for marker, label in (("down", "negative"), ("flat", "neutral"), ("up", "positive")):
        for extra in range(6):
            docs.append([marker] * (10 + extra) + ["base"] * (10 - extra))
            labels.append(label)
    model = fx.NBModel.train(docs, labels, min_count=1)
    assert model.classify(["up"] * 12 + ["base"] * 8) == "positive"
    assert model.classify(["down"] * 12 + ["base"] * 8) == "negative"
    assert model.sentiment_score(["up"] * 12 + ["base"] * 8) > 0.5
    p = model.posterior(["flat"] * 12 + ["base"] * 8)
    approx(sum(p), 1.0, 1e-12)
    with tempfile.TemporaryDirectory() as tmp:
        path = str(Path(tmp) / "model.txt")
        model.save(path)
        reloaded = fx.NBModel.load(path)
        assert reloaded.vocabulary() == model.vocabulary()
        assert reloaded.classify(["up"] * 12 + ["base"] * 8) == "positive"

    # Indicators
    assert fx.sma([1.0, 2.0, 3.0, 4.0], 2) == [1.5, 2.5, 3.5]
    out = fx.rsi([1.0, 1.1, 1.05, 1.15], period=2)
    approx(out[0], 100.0 * 2.0 / 3.0, 1e-9)
    approx(out[1], 100.0 * 6.0 / 7.0, 1e-9)
    assert all(v == 100.0 for v in fx.rsi([1.0 + 0.01 * i for i in range(30)]))

    # Fusion
    assert fx.generate_signal(0.6, 3, 1.10, 1.08, 62.0) == ("buy", "strong")
    assert fx.generate_signal(-0.30, 3, 1.05, 1.08, 41.0) == ("sell", "normal")
    assert fx.generate_signal(0.6, 3, 1.10, 1.08, 45.0) == ("none", None)

    # Metrics
    assert math.isclose(fx.f1_score(0.87, 0.85), 0.86, abs_tol=0.005)

    # End-to-end pipeline, twice, byte-identical artifacts
    with tempfile.TemporaryDirectory() as tmp:
        config = Path(tmp) / "run.conf"
        config.write_text(
            f"news = {REPO / 'data' / 'sample' / 'news_usdcad.csv'}\n"
            f"prices = {REPO / 'data' / 'sample' / 'usdcad_d1.csv'}\n"
            f"stopwords = {REPO / 'data' / 'stopwords.txt'}\n"
            f"lexicon = {REPO / 'data' / 'lexicon.tsv'}\n"
            "engine = lexicon\n"
            "pair = USDCAD\n"
            "timeframe = D1\n"
        )
        out_a, out_b = Path(tmp) / "a", Path(tmp) / "b"
        summary = fx.run_pipeline_from_config(str(config), str(out_a))
        assert summary["trade_count"] > 0
        assert summary["directional_signals"] > 0
        fx.run_pipeline_from_config(str(config), str(out_b))
        for artifact in sorted(out_a.iterdir()):
            twin = out_b / artifact.name
            assert twin.exists(), f"missing {twin}"
            assert artifact.read_bytes() == twin.read_bytes(), f"{artifact.name} differs"

    print("smoke test passed")


if __name__ == "__main__":
    main()
