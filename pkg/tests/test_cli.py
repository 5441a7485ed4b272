import json

import pytest

from mtlab import cli, toydata


@pytest.fixture(scope="module")
def prepared(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    src, tgt = toydata.toy_paths()
    (root / "raw.pl").write_text("".join(src.read_text(encoding="utf-8").splitlines(True)[:200]),
                                 encoding="utf-8")
    (root / "raw.en").write_text("".join(tgt.read_text(encoding="utf-8").splitlines(True)[:200]),
                                 encoding="utf-8")
    assert cli.main(["prepare", "--source", str(root / "raw.pl"), "--target", str(root / "raw.en"),
                     "--out", str(root / "data"), "--test-size", "10"]) == 0
    return root


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_prepare_outputs(prepared):
    data = prepared / "data"
    assert len((data / "test.pl").read_text().splitlines()) == 10
    assert json.loads((data / "train.stats.json").read_text())["sentences"] == 190


@pytest.fixture(scope="module")
def smt(prepared):
    d, m = prepared / "data", prepared / "smt"
    m.mkdir()
    assert run("train-lm", "--input", d / "train.en", "--output", m / "lm.plmt", "--order", 3,
               "--dev", d / "test.en") == 0
    assert run("align", "--source", d / "train.pl", "--target", d / "train.en",
               "--output", m / "align.txt", "--lex", m / "lex.json", "--iterations", 5) == 0
    assert run("extract", "--source", d / "train.pl", "--target", d / "train.en",
               "--alignment", m / "align.txt", "--lex", m / "lex.json",
               "--output", m / "pt.txt", "--reordering", m / "ro.txt") == 0
    return m


def test_smt_chain(prepared, smt, capsys):
    d = prepared / "data"
    assert run("decode", "--phrase-table", smt / "pt.txt", "--reordering", smt / "ro.txt",
               "--lm", smt / "lm.plmt", "--input", d / "test.pl", "--output", smt / "hyp.txt",
               "--trace", smt / "trace.jsonl", "--beam", 20) == 0
    assert len((smt / "hyp.txt").read_text().splitlines()) == 10
    first = json.loads((smt / "trace.jsonl").read_text().splitlines()[0])
    assert set(first) == {"target", "score", "features", "derivation"}
    capsys.readouterr()
    assert run("score", "--hyp", smt / "hyp.txt", "--ref", d / "test.en") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["bleu"] > 30


def test_nbest_and_weights(prepared, smt):
    d = prepared / "data"
    (smt / "w.json").write_text(json.dumps({"lm": 0.5, "word_penalty": -0.2}))
    assert run("decode", "--phrase-table", smt / "pt.txt", "--lm", smt / "lm.plmt",
               "--weights", smt / "w.json", "--input", d / "test.pl",
               "--output", smt / "nbest.txt", "--nbest", 3) == 0
    lines = [line.split(" ||| ") for line in (smt / "nbest.txt").read_text().splitlines()]
    assert {int(i) for i, _, _ in lines} == set(range(10))
    scores = [float(s) for i, _, s in lines if i == "0"]
    assert scores == sorted(scores, reverse=True)


def test_neural_chain(prepared):
    d, m = prepared / "data", prepared / "nmt"
    m.mkdir()
    assert run("train-neural", "--source", d / "train.pl", "--target", d / "train.en",
               "--variant", "ENDEC", "--output", m / "e.pnmt", "--log", m / "log.jsonl",
               "--updates", 3, "--hidden", 4, "--emb", 4, "--att", 4) == 0
    assert len((m / "log.jsonl").read_text().splitlines()) == 3
    assert run("translate", "--model", m / "e.pnmt", "--variant", "ENDEC",
               "--input", d / "test.pl", "--output", m / "hyp.txt", "--beam", 2) == 0
    assert len((m / "hyp.txt").read_text().splitlines()) == 10


def test_sentence_level_scores(tmp_path, capsys):
    (tmp_path / "h").write_text("a b c\nx\n")
    (tmp_path / "r").write_text("a b c\ny\n")
    assert run("score", "--hyp", tmp_path / "h", "--ref", tmp_path / "r", "--lines", "ter") == 0
    assert capsys.readouterr().out.split() == ["0.0000", "100.0000"]


def test_report(tmp_path, capsys):
    rep = {"bleu": 36.73, "nist_raw": 8.3715, "nist_scaled": 55.81, "meteor": 60.01, "ter": 60.94}
    (tmp_path / "s.json").write_text(json.dumps(
        {"systems": ["SMT"], "directions": ["pl-en"], "cells": {"SMT": {"pl-en": rep}}}))
    assert run("report", "--scores", tmp_path / "s.json") == 0
    out = capsys.readouterr().out
    assert out.startswith("Polish-to-English\n") and "SMT  36.73" in out


def test_errors_exit_nonzero(tmp_path, capsys):
    (tmp_path / "h").write_text("a\nb\n")
    (tmp_path / "r").write_text("a\n")
    assert run("score", "--hyp", tmp_path / "h", "--ref", tmp_path / "r") == 1
    assert "mtlab score: error: line count mismatch" in capsys.readouterr().err
    assert run("run", "--config", tmp_path / "missing.json") == 1
    assert run("run") == 1


def test_run_with_config(tmp_path, capsys):
    src, tgt = toydata.toy_paths()
    config = {"source": str(src), "target": str(tgt), "out": str(tmp_path / "out"),
              "systems": ["SMT"], "directions": ["backward"], "lm_order": 3, "ibm_iterations": 3,
              "split": {"test_size": 10, "max_test_sentence_words": 50, "seed": 0}}
    (tmp_path / "exp.json").write_text(json.dumps(config))
    assert run("run", "--config", tmp_path / "exp.json", "--seed", 2) == 0
    assert capsys.readouterr().out.startswith("English-to-Polish")
    assert (tmp_path / "out" / "hyp.SMT.en-pl.txt").exists()
