"""End-to-end experiment: prepare data, train SMT / ENDEC / SEARCH systems in
each direction, translate the held-out set, score and report.

Layout of an output directory::

    data/        train.<lang>, test.<lang>, *.stats.json
    models/      lm.<dir>.plmt, phrase-table.<dir>.txt, reordering.<dir>.txt,
                 align.<dir>.txt, <variant>.<dir>.pnmt, <variant>.<dir>.log.jsonl,
                 vocab.<dir>.json
    hyp.<system>.<direction>.txt
    scores.json
    report.txt
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import align, corpus, decoder, lm, metrics, neural
from .corpus import ParallelCorpus, SplitSpec, Vocabulary

log = logging.getLogger(__name__)

SYSTEMS = ("SMT", "ENDEC", "SEARCH")
LANGUAGE_NAMES = {"pl": "Polish", "en": "English"}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def _neural_defaults(variant: str) -> dict:
    return {"variant": variant, "max_updates": 1500, "batch_size": 8, "hidden": 32,
            "emb": 16, "att": 32, "learning_rate": 1.0, "clip_norm": 5.0}


@dataclass
class ExperimentConfig:
    source: str
    target: str
    out: str
    source_lang: str = "pl"
    target_lang: str = "en"
    directions: list[str] = field(default_factory=lambda: ["forward", "backward"])
    systems: list[str] = field(default_factory=lambda: list(SYSTEMS))
    split: dict = field(default_factory=lambda: {"test_size": 200,
                                                 "max_test_sentence_words": 50, "seed": 0})
    clean: dict = field(default_factory=lambda: {"max_len": 80, "max_ratio": 9.0})
    lm_order: int = 5
    ibm_iterations: int = 10
    max_phrase_len: int = 7
    decoder: dict = field(default_factory=lambda: {"beam_size": 50, "distortion_limit": 6})
    neural: dict = field(default_factory=lambda: {v: _neural_defaults(v) for v in ("ENDEC", "SEARCH")})
    neural_beam: int = 1
    max_output_ratio: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not self.systems:
            raise ConfigError("at least one system must be enabled")
        bad = set(self.systems) - set(SYSTEMS)
        if bad:
            raise ConfigError(f"unknown systems: {sorted(bad)}")
        bad = set(self.directions) - {"forward", "backward"}
        if bad:
            raise ConfigError(f"directions must be 'forward' and/or 'backward', not {sorted(bad)}")
        if not self.directions:
            raise ConfigError("at least one direction must be enabled")

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        base = Path(path).parent
        for key in ("source", "target"):
            if key in data and not os.path.isabs(data[key]):
                data[key] = str(base / data[key])
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Copy with every random seed derived from ``seed``."""
        data = asdict(self)
        data["seed"] = seed
        data["split"] = dict(self.split, seed=seed)
        data["neural"] = {v: dict(c, seed=seed) for v, c in self.neural.items()}
        return ExperimentConfig(**data)

    def direction_langs(self, direction: str) -> tuple[str, str]:
        if direction == "forward":
            return self.source_lang, self.target_lang
        return self.target_lang, self.source_lang

    def direction_label(self, direction: str) -> str:
        return "{}-{}".format(*self.direction_langs(direction))


# -- score table ------------------------------------------------------------

@dataclass
class ScoreTable:
    systems: list[str]
    directions: list[str]     # labels such as "pl-en"
    cells: dict[tuple[str, str], metrics.MetricReport] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "systems": list(self.systems),
            "directions": list(self.directions),
            "cells": {s: {d: self.cells[(s, d)].to_dict()
                          for d in self.directions if (s, d) in self.cells}
                      for s in self.systems},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScoreTable":
        cells = {}
        for s, row in data["cells"].items():
            for d, rep in row.items():
                cells[(s, d)] = metrics.MetricReport.from_dict(rep)
        return cls(list(data["systems"]), list(data["directions"]), cells)


def _direction_title(label: str) -> str:
    src, _, tgt = label.partition("-")
    return f"{LANGUAGE_NAMES.get(src, src)}-to-{LANGUAGE_NAMES.get(tgt, tgt)}"


def render_report(table: ScoreTable, fmt: str = "text") -> str:
    """Table-style report; ``json`` is lossless, ``text`` mirrors the printed table."""
    if fmt == "json":
        return json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = []
    for d in table.directions:
        lines.append(_direction_title(d))
        lines.append("System  BLEU  NIST  METEOR  TER")
        for s in table.systems:
            rep = table.cells.get((s, d))
            if rep is None:
                continue
            values = "  ".join(f"{v:.2f}" for v in (rep.bleu, rep.nist_scaled, rep.meteor, rep.ter))
            lines.append(f"{s}  {values}  (NIST raw {rep.nist_raw:.2f})  {metrics.interpret_bleu(rep.bleu)}")
        lines.append("")
    return "\n".join(lines)


# -- stages -----------------------------------------------------------------

def score_outputs(hypotheses_path, references_path) -> metrics.MetricReport:
    hyps = corpus.read_tokenized(hypotheses_path)
    refs = corpus.read_tokenized(references_path)
    if len(hyps) != len(refs):
        raise metrics.MetricError(
            f"line count mismatch: {hypotheses_path} has {len(hyps)} lines, "
            f"{references_path} has {len(refs)}")
    return metrics.score_corpus(hyps, refs)


def prepare(config: ExperimentConfig) -> tuple[ParallelCorpus, ParallelCorpus, dict]:
    raw = corpus.load_parallel(config.source, config.target,
                               config.source_lang, config.target_lang)
    tok = corpus.tokenize_corpus(raw)
    cleaned, removed = corpus.clean_corpus(tok, **config.clean)
    train, test = corpus.split_corpus(cleaned, SplitSpec(**config.split))
    info = {"loaded": len(raw), "removed_by_cleaning": removed,
            "train": corpus.corpus_stats(train), "test": corpus.corpus_stats(test)}
    return train, test, info


def train_smt(train: ParallelCorpus, config: ExperimentConfig, model_dir: Path, label: str):
    table, reordering, alignments, _ = align.train_phrase_models(
        train, config.ibm_iterations, config.max_phrase_len)
    vocab = corpus.build_vocab(train, "target")
    sents = [vocab.encode(t, wrap=True) for t in train.targets()]
    model = lm.train_lm(sents, config.lm_order, vocabulary=vocab)
    lm.save_lm(model, model_dir / f"lm.{label}.plmt")
    align.write_phrase_table(table, model_dir / f"phrase-table.{label}.txt")
    align.write_reordering_table(reordering, model_dir / f"reordering.{label}.txt")
    with open(model_dir / f"align.{label}.txt", "w", encoding="utf-8") as fh:
        for a in alignments:
            fh.write(a.to_text() + "\n")
    return table, reordering, model


def translate_smt(test: ParallelCorpus, models, config: ExperimentConfig) -> list[list[str]]:
    table, reordering, model = models
    dconf = decoder.DecoderConfig(**config.decoder)
    return [decoder.decode(src, table, reordering, model, dconf).target for src in test.sources()]


def train_neural(train: ParallelCorpus, variant: str, config: ExperimentConfig,
                 model_dir: Path, label: str):
    src_vocab = corpus.build_vocab(train, "source")
    tgt_vocab = corpus.build_vocab(train, "target")
    tconf = neural.TrainConfig(**dict(config.neural.get(variant, _neural_defaults(variant)),
                                      variant=variant))
    pairs = [(src_vocab.encode(p.source), tgt_vocab.encode(p.target)) for p in train.pairs]
    dims = neural.Dims(len(src_vocab), len(tgt_vocab), tconf.emb, tconf.hidden, tconf.att)
    params, _ = neural.train(pairs, tconf, dims,
                             log_path=model_dir / f"{variant}.{label}.log.jsonl")
    neural.save_params(params, model_dir / f"{variant}.{label}.pnmt")
    with open(model_dir / f"vocab.{label}.json", "w", encoding="utf-8") as fh:
        json.dump({"source": src_vocab.to_dict(), "target": tgt_vocab.to_dict()}, fh,
                  ensure_ascii=False, sort_keys=True)
    return params, src_vocab, tgt_vocab


def translate_neural(test: ParallelCorpus, variant: str, models,
                     config: ExperimentConfig) -> list[list[str]]:
    params, src_vocab, tgt_vocab = models
    out = []
    for src in test.sources():
        ids = src_vocab.encode(src)
        max_out = max(1, int(config.max_output_ratio * len(ids)) + 1)
        if config.neural_beam > 1:
            hyp, _ = neural.translate_beam(params, ids, variant, max_out, config.neural_beam)
        else:
            hyp, _ = neural.translate_greedy(params, ids, variant, max_out)
        out.append(tgt_vocab.decode(hyp))
    return out


def _write_lines(path: Path, sentences) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(" ".join(s) + "\n")


def _stage(name: str, func, *args, **kwargs):
    log.info("stage %s", name)
    try:
        return func(*args, **kwargs)
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_pipeline(config: ExperimentConfig) -> ScoreTable:
    """Run every enabled system in every enabled direction and write all artifacts."""
    for path in (config.source, config.target):
        if not os.path.exists(path):
            raise ConfigError(f"corpus file not found: {path}")
    out = Path(config.out)
    data_dir, model_dir = out / "data", out / "models"
    data_dir.mkdir(parents=True, exist_ok=True)
    model_dir.mkdir(parents=True, exist_ok=True)

    train, test, info = _stage("prepare", prepare, config)
    src_l, tgt_l = config.source_lang, config.target_lang
    corpus.write_parallel(train, data_dir / f"train.{src_l}", data_dir / f"train.{tgt_l}",
                          data_dir / "train.stats.json")
    corpus.write_parallel(test, data_dir / f"test.{src_l}", data_dir / f"test.{tgt_l}",
                          data_dir / "test.stats.json")

    systems = [s for s in SYSTEMS if s in config.systems]
    labels = [config.direction_label(d) for d in config.directions]
    table = ScoreTable(systems, labels)
    for direction, label in zip(config.directions, labels):
        d_train = train if direction == "forward" else train.reversed()
        d_test = test if direction == "forward" else test.reversed()
        refs = d_test.targets()
        for system in systems:
            if system == "SMT":
                models = _stage(f"train-smt {label}", train_smt, d_train, config, model_dir, label)
                hyps = _stage(f"decode {label}", translate_smt, d_test, models, config)
            else:
                models = _stage(f"train-{system.lower()} {label}", train_neural,
                                d_train, system, config, model_dir, label)
                hyps = _stage(f"translate-{system.lower()} {label}", translate_neural,
                              d_test, system, models, config)
            hyp_path = out / f"hyp.{system}.{label}.txt"
            _write_lines(hyp_path, hyps)
            table.cells[(system, label)] = _stage(f"score {system} {label}", metrics.score_corpus,
                                                  hyps, refs)
    with open(out / "scores.json", "w", encoding="utf-8") as fh:
        fh.write(render_report(table, "json"))
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(render_report(table, "text"))
    with open(out / "data" / "prepare.json", "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return table


def toy_config(out, **overrides) -> ExperimentConfig:
    """Experiment over the bundled toy corpus with desk-scale defaults."""
    from .toydata import toy_paths
    src, tgt = toy_paths()
    return ExperimentConfig(source=str(src), target=str(tgt), out=str(out), **overrides)


def load_vocab_pair(path) -> tuple[Vocabulary, Vocabulary]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return Vocabulary.from_dict(data["source"]), Vocabulary.from_dict(data["target"])
