"""Parallel corpus ingestion, cleaning, vocabulary building and splitting.

A corpus is loaded untokenized (one sentence per line, UTF-8), tokenized
with :func:`tokenize`, filtered with :func:`clean_corpus` and split into a
training part and a held-out test part with :func:`split_corpus`.
"""

from __future__ import annotations

import json
import os
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

UNK, BOS, EOS = "<unk>", "<s>", "</s>"
UNK_ID, BOS_ID, EOS_ID = 0, 1, 2

# word-internal apostrophes and hyphens stay attached; other punctuation is
# split off one character at a time
_TOKEN_RE = re.compile(r"\w+(?:['\-]\w+)*|[^\w\s]")
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class SentencePair:
    id: int
    source: tuple[str, ...] | str
    target: tuple[str, ...] | str


@dataclass
class ParallelCorpus:
    pairs: list[SentencePair] = field(default_factory=list)
    source_lang: str = "src"
    target_lang: str = "tgt"

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def tokenized(self) -> bool:
        return all(not isinstance(p.source, str) for p in self.pairs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Sequence[str], Sequence[str]]],
                   source_lang: str = "src", target_lang: str = "tgt") -> "ParallelCorpus":
        """Build a tokenized corpus from ``(source_tokens, target_tokens)`` tuples."""
        built = [SentencePair(i, tuple(s), tuple(t)) for i, (s, t) in enumerate(pairs)]
        return cls(built, source_lang, target_lang)

    def reversed(self) -> "ParallelCorpus":
        """The same corpus with source and target roles exchanged."""
        pairs = [SentencePair(p.id, p.target, p.source) for p in self.pairs]
        return ParallelCorpus(pairs, self.target_lang, self.source_lang)

    def sources(self) -> list:
        return [p.source for p in self.pairs]

    def targets(self) -> list:
        return [p.target for p in self.pairs]


class Vocabulary:
    """Bijective token/id map with fixed reserved ids (0 unk, 1 start, 2 end)."""

    def __init__(self, counts: dict[str, int] | None = None):
        self.counts: dict[str, int] = {}
        self.itos: list[str] = [UNK, BOS, EOS]
        self.stoi: dict[str, int] = {UNK: UNK_ID, BOS: BOS_ID, EOS: EOS_ID}
        if counts:
            for tok, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
                self.add(tok, c)

    def add(self, token: str, count: int = 1) -> int:
        if token in self.stoi:
            if token not in (UNK, BOS, EOS):
                self.counts[token] += count
            return self.stoi[token]
        if count < 1:
            raise CorpusError(f"count for {token!r} must be >= 1")
        idx = len(self.itos)
        self.itos.append(token)
        self.stoi[token] = idx
        self.counts[token] = count
        return idx

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self.itos[idx]

    def encode(self, tokens: Iterable[str], wrap: bool = False) -> list[int]:
        ids = [self.stoi.get(t, UNK_ID) for t in tokens]
        return [BOS_ID, *ids, EOS_ID] if wrap else ids

    def decode(self, ids: Iterable[int], strip: bool = True) -> list[str]:
        out = []
        for i in ids:
            if strip and i in (BOS_ID, EOS_ID):
                continue
            out.append(self.itos[i])
        return out

    def to_dict(self) -> dict:
        return {"tokens": self.itos[3:], "counts": [self.counts[t] for t in self.itos[3:]]}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        vocab = cls()
        for tok, c in zip(data["tokens"], data["counts"]):
            vocab.add(tok, c)
        return vocab


@dataclass(frozen=True)
class SplitSpec:
    test_size: int = 1000
    max_test_sentence_words: int = 50
    seed: int = 0


def _read_lines(path: str | os.PathLike) -> list[str]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data:
        return []
    raw = data.split(b"\n")
    if raw[-1] == b"":
        raw.pop()
    lines = []
    for lineno, chunk in enumerate(raw, start=1):
        try:
            lines.append(chunk.decode("utf-8").rstrip("\r"))
        except UnicodeDecodeError as exc:
            raise CorpusError(f"{path}: invalid UTF-8 on line {lineno}: {exc.reason}") from None
    return lines


def load_parallel(source_path, target_path, source_lang: str = "src",
                  target_lang: str = "tgt") -> ParallelCorpus:
    """Pair two line-aligned text files into an (untokenized) corpus."""
    src = _read_lines(source_path)
    tgt = _read_lines(target_path)
    if len(src) != len(tgt):
        raise CorpusError(
            f"line count mismatch: {source_path} has {len(src)} lines, "
            f"{target_path} has {len(tgt)} lines")
    pairs = [SentencePair(i, s, t) for i, (s, t) in enumerate(zip(src, tgt))]
    return ParallelCorpus(pairs, source_lang, target_lang)


def tokenize(line: str) -> list[str]:
    """Lowercase and split punctuation off words.

    >>> tokenize("I can't hear you very well.")
    ['i', "can't", 'hear', 'you', 'very', 'well', '.']
    """
    return _TOKEN_RE.findall(line.translate(_APOSTROPHES).lower())


def tokenize_corpus(corpus: ParallelCorpus) -> ParallelCorpus:
    pairs = []
    for p in corpus.pairs:
        src = p.source if not isinstance(p.source, str) else tuple(tokenize(p.source))
        tgt = p.target if not isinstance(p.target, str) else tuple(tokenize(p.target))
        pairs.append(SentencePair(p.id, src, tgt))
    return ParallelCorpus(pairs, corpus.source_lang, corpus.target_lang)


def _require_tokenized(corpus: ParallelCorpus) -> None:
    if not corpus.tokenized:
        raise CorpusError("corpus must be tokenized first (see tokenize_corpus)")


def _reindex(pairs: Iterable[SentencePair]) -> list[SentencePair]:
    return [SentencePair(i, p.source, p.target) for i, p in enumerate(pairs)]


def clean_corpus(corpus: ParallelCorpus, max_len: int = 80,
                 max_ratio: float = 9.0) -> tuple[ParallelCorpus, int]:
    """Drop empty, overlong and badly length-mismatched pairs.

    Returns the filtered corpus (re-indexed densely) and the number of pairs
    removed.
    """
    _require_tokenized(corpus)
    kept = []
    for p in corpus.pairs:
        ls, lt = len(p.source), len(p.target)
        if ls == 0 or lt == 0:
            continue
        if ls > max_len or lt > max_len:
            continue
        if max(ls, lt) / min(ls, lt) > max_ratio:
            continue
        kept.append(p)
    cleaned = ParallelCorpus(_reindex(kept), corpus.source_lang, corpus.target_lang)
    return cleaned, len(corpus) - len(kept)


def build_vocab(corpus: ParallelCorpus, side: str = "source", min_count: int = 1) -> Vocabulary:
    """Count tokens on one side; ids go by descending count, then lexicographically."""
    _require_tokenized(corpus)
    if side not in ("source", "target"):
        raise CorpusError(f"side must be 'source' or 'target', not {side!r}")
    if len(corpus) == 0:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for p in corpus.pairs:
        counts.update(getattr(p, side))
    return Vocabulary({t: c for t, c in counts.items() if c >= min_count})


def split_corpus(corpus: ParallelCorpus, spec: SplitSpec) -> tuple[ParallelCorpus, ParallelCorpus]:
    """Seeded random held-out split.

    The test part is sampled without replacement from pairs whose both sides
    have at most ``spec.max_test_sentence_words`` tokens; everything else is
    training data. Both parts keep the original corpus order.
    """
    _require_tokenized(corpus)
    if spec.max_test_sentence_words <= 0:
        raise CorpusError("max_test_sentence_words must be positive")
    if spec.test_size >= len(corpus):
        raise CorpusError(
            f"test_size {spec.test_size} must be smaller than the corpus size {len(corpus)}")
    cap = spec.max_test_sentence_words
    eligible = [i for i, p in enumerate(corpus.pairs)
                if len(p.source) <= cap and len(p.target) <= cap]
    if len(eligible) < spec.test_size:
        raise CorpusError(
            f"only {len(eligible)} pairs have both sides <= {cap} words; "
            f"cannot sample {spec.test_size}")
    chosen = set(random.Random(spec.seed).sample(eligible, spec.test_size))
    test = [p for i, p in enumerate(corpus.pairs) if i in chosen]
    train = [p for i, p in enumerate(corpus.pairs) if i not in chosen]
    return (ParallelCorpus(_reindex(train), corpus.source_lang, corpus.target_lang),
            ParallelCorpus(_reindex(test), corpus.source_lang, corpus.target_lang))


def corpus_stats(corpus: ParallelCorpus) -> dict[str, int]:
    _require_tokenized(corpus)
    src_vocab, tgt_vocab = set(), set()
    src_tokens = tgt_tokens = 0
    for p in corpus.pairs:
        src_tokens += len(p.source)
        tgt_tokens += len(p.target)
        src_vocab.update(p.source)
        tgt_vocab.update(p.target)
    return {
        "sentences": len(corpus),
        "source_tokens": src_tokens,
        "target_tokens": tgt_tokens,
        "source_unique": len(src_vocab),
        "target_unique": len(tgt_vocab),
    }


def write_parallel(corpus: ParallelCorpus, source_path, target_path,
                   stats_path=None) -> None:
    """Write a tokenized corpus as two line-aligned files plus a JSON stats sidecar.

    The sidecar defaults to ``<source_path>.stats.json``.
    """
    _require_tokenized(corpus)
    with open(source_path, "w", encoding="utf-8", newline="\n") as fs, \
            open(target_path, "w", encoding="utf-8", newline="\n") as ft:
        for p in corpus.pairs:
            fs.write(" ".join(p.source) + "\n")
            ft.write(" ".join(p.target) + "\n")
    if stats_path is None:
        stats_path = f"{source_path}.stats.json"
    stats = dict(corpus_stats(corpus), source_lang=corpus.source_lang,
                 target_lang=corpus.target_lang)
    with open(stats_path, "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_tokenized(path) -> list[tuple[str, ...]]:
    """Read a pre-tokenized file: whitespace-separated tokens, one sentence per line."""
    return [tuple(line.split()) for line in _read_lines(path)]
