"""Phrase-based and neural machine translation on numpy, with the usual
evaluation metrics and an end-to-end comparison harness."""

from .bench import ExperimentConfig, ScoreTable, render_report, run_pipeline
from .corpus import ParallelCorpus, SentencePair, Vocabulary
from .metrics import MetricReport, bleu, interpret_bleu, meteor, nist, score_corpus, ter

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "MetricReport", "ParallelCorpus", "ScoreTable", "SentencePair",
    "Vocabulary", "bleu", "interpret_bleu", "meteor", "nist", "render_report",
    "run_pipeline", "score_corpus", "ter",
]
