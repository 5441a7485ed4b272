"""N-gram language model with interpolated Kneser-Ney smoothing.

Training turns counts into a backoff-style representation: every observed
n-gram stores its fully interpolated probability, and every observed
context stores the interpolation weight handed down to the next lower
order. Queries only walk these tables, so a saved and reloaded model gives
bit-identical answers.

Binary format (little-endian)::

    magic      5 bytes  b"PLMT1"
    version    u8       1
    order      u8
    n_vocab    u32
    vocab      n_vocab records, ids ascending:
                 id i32, name_len u16, name utf-8[name_len]
    discounts  f64[order]
    for k in 1..order:
        n_grams    u32
        grams      i32[n_grams * k]         lexicographically sorted
        probs      f64[n_grams]
        n_ctx      u32
        contexts   i32[n_ctx * (k - 1)]     sorted
        backoffs   f64[n_ctx]               interpolation weights
    end        4 bytes  b"END!"
"""

from __future__ import annotations

import logging
import math
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import BOS_ID, EOS_ID, UNK_ID

log = logging.getLogger(__name__)

MAGIC = b"PLMT1"
VERSION = 1
_END = b"END!"
FALLBACK_DISCOUNT = 0.5


class LMError(ValueError):
    pass


@dataclass(frozen=True)
class LmState:
    context: tuple[int, ...] = (BOS_ID,)


@dataclass
class NGramModel:
    order: int
    vocab: frozenset
    discounts: list[float]
    # probs[k] maps a k-gram to P(last | first k-1); backoffs[k] maps a
    # (k-1)-gram context to its interpolation weight at order k
    probs: dict[int, dict[tuple, float]] = field(default_factory=dict)
    backoffs: dict[int, dict[tuple, float]] = field(default_factory=dict)
    names: dict[int, str] = field(default_factory=dict)

    def word_id(self, token: str) -> int:
        """Id of a surface token; anything unknown maps to the unknown marker."""
        ids = getattr(self, "_ids", None)
        if ids is None:
            ids = self._ids = {name: i for i, name in self.names.items()}
        return ids.get(token, UNK_ID)

    def initial_state(self) -> LmState:
        return LmState((BOS_ID,) if self.order > 1 else ())

    def prob(self, word: int, context: Sequence[int] = ()) -> float:
        if word not in self.vocab:
            word = UNK_ID
        ctx = tuple(c if c in self.vocab else UNK_ID for c in context)
        ctx = ctx[max(0, len(ctx) - (self.order - 1)):] if self.order > 1 else ()
        weight = 1.0
        for k in range(len(ctx) + 1, 0, -1):
            h = ctx[len(ctx) - (k - 1):] if k > 1 else ()
            p = self.probs[k].get(h + (word,))
            if p is not None:
                return weight * p
            bo = self.backoffs[k].get(h)
            if bo is not None:
                weight *= bo
        return 0.0

    def next_state(self, state: LmState, word: int) -> LmState:
        if self.order == 1:
            return LmState(())
        if word not in self.vocab:
            word = UNK_ID
        ctx = state.context + (word,)
        return LmState(ctx[max(0, len(ctx) - (self.order - 1)):])

    def predictable(self) -> list[int]:
        """Every id the model can emit (all known ids except the start marker)."""
        return sorted(w for w in self.vocab if w != BOS_ID)

    def dump_text(self) -> str:
        """Debug dump: one ``n-gram TAB log10-prob`` line per stored n-gram."""
        lines = []
        for k in range(1, self.order + 1):
            for gram in sorted(self.probs[k]):
                p = self.probs[k][gram]
                lp = math.log10(p) if p > 0 else float("-inf")
                lines.append(" ".join(map(str, gram)) + f"\t{lp:.6f}")
        return "\n".join(lines) + "\n"


def _discount(counts: Iterable[int], k: int) -> float:
    n1 = n2 = 0
    for c in counts:
        if c == 1:
            n1 += 1
        elif c == 2:
            n2 += 1
    if n1 == 0 or n2 == 0:
        log.warning("order %d: degenerate count-of-counts (n1=%d, n2=%d); using D=%.1f",
                    k, n1, n2, FALLBACK_DISCOUNT)
        return FALLBACK_DISCOUNT
    return n1 / (n1 + 2 * n2)


def train_lm(sentences: Iterable[Sequence[int]], order: int = 5,
             unk_floor: float = 1.0, vocabulary=None) -> NGramModel:
    """Estimate an interpolated Kneser-Ney model from id sentences.

    Every sentence must be wrapped in start/end markers. The highest order
    and n-grams beginning with the start marker use raw counts; lower orders
    use continuation counts (number of distinct left extensions). The
    unigram level adds ``unk_floor`` pseudo continuation counts for the
    unknown marker so unseen words keep nonzero probability. Passing the
    :class:`~mtlab.corpus.Vocabulary` the ids came from lets the model be
    queried by surface token later.
    """
    if order < 1:
        raise LMError("order must be >= 1")
    sentences = [tuple(s) for s in sentences]
    if not sentences:
        raise LMError("need at least one training sentence")
    for s in sentences:
        if len(s) < 2 or s[0] != BOS_ID or s[-1] != EOS_ID:
            raise LMError("training sentences must be wrapped in start/end markers")

    raw: list[dict[tuple, int]] = [defaultdict(int) for _ in range(order + 1)]
    for s in sentences:
        for k in range(1, order + 1):
            for i in range(len(s) - k + 1):
                raw[k][s[i:i + k]] += 1

    # adjusted counts per order
    adjusted: dict[int, dict[tuple, int]] = {order: dict(raw[order])}
    for k in range(order - 1, 0, -1):
        cont: dict[tuple, int] = defaultdict(int)
        for gram in raw[k + 1]:
            cont[gram[1:]] += 1
        adj = {}
        for gram, c in raw[k].items():
            adj[gram] = c if gram[0] == BOS_ID else cont.get(gram, 0)
        adjusted[k] = {g: c for g, c in adj.items() if c > 0}
    if order == 1:
        adjusted[1] = dict(raw[1])
    adjusted[1].pop((BOS_ID,), None)

    vocab = {w for s in sentences for w in s} | {UNK_ID}
    discounts = [0.0] * order
    for k in range(2, order + 1):
        discounts[k - 1] = _discount(adjusted[k].values(), k)

    # unigram base distribution
    uni = dict(adjusted[1])
    uni[(UNK_ID,)] = uni.get((UNK_ID,), 0) + unk_floor
    total = sum(uni.values())
    probs: dict[int, dict[tuple, float]] = {1: {g: c / total for g, c in uni.items()}}
    backoffs: dict[int, dict[tuple, float]] = {1: {}}

    for k in range(2, order + 1):
        d = discounts[k - 1]
        by_ctx: dict[tuple, list[tuple[int, int]]] = defaultdict(list)
        for gram, c in adjusted[k].items():
            by_ctx[gram[:-1]].append((gram[-1], c))
        probs[k] = {}
        backoffs[k] = {}
        model_so_far = NGramModel(k - 1, frozenset(vocab), discounts, probs, backoffs)
        for ctx, entries in by_ctx.items():
            c_ctx = sum(c for _, c in entries)
            lam = d * len(entries) / c_ctx
            backoffs[k][ctx] = lam
            lower_ctx = ctx[1:]
            for w, c in entries:
                p_lower = model_so_far.prob(w, lower_ctx)
                probs[k][ctx + (w,)] = max(c - d, 0.0) / c_ctx + lam * p_lower
    names = {i: vocabulary.token(i) for i in vocab} if vocabulary is not None else {}
    return NGramModel(order, frozenset(vocab), discounts, probs, backoffs, names)


def log_prob(model: NGramModel, word: int, state: LmState) -> float:
    """log10 P(word | state)."""
    p = model.prob(word, state.context)
    return math.log10(p) if p > 0 else float("-inf")


def sentence_log_prob(model: NGramModel, sentence: Sequence[int]) -> tuple[float, int]:
    """Total log10 probability of a wrapped sentence and the number of predictions."""
    if len(sentence) < 2 or sentence[0] != BOS_ID:
        raise LMError("sentence must start with the start marker")
    state = model.initial_state()
    total = 0.0
    for w in sentence[1:]:
        total += log_prob(model, w, state)
        state = model.next_state(state, w)
    return total, len(sentence) - 1


def perplexity(model: NGramModel, sentences: Iterable[Sequence[int]]) -> float:
    """Per-token perplexity over wrapped sentences, end markers included."""
    total = 0.0
    n = 0
    for s in sentences:
        lp, k = sentence_log_prob(model, s)
        total += lp
        n += k
    if n == 0:
        raise LMError("perplexity needs a non-empty evaluation set")
    return 10.0 ** (-total / n)


def save_lm(model: NGramModel, path) -> None:
    parts = [MAGIC, struct.pack("<BB", VERSION, model.order)]
    parts.append(struct.pack("<I", len(model.vocab)))
    for i in sorted(model.vocab):
        name = model.names.get(i, "").encode("utf-8")
        parts.append(struct.pack("<iH", i, len(name)) + name)
    parts.append(np.asarray(model.discounts, dtype="<f8").tobytes())
    for k in range(1, model.order + 1):
        grams = sorted(model.probs[k])
        parts.append(struct.pack("<I", len(grams)))
        parts.append(np.array(grams, dtype="<i4").reshape(-1).tobytes())
        parts.append(np.array([model.probs[k][g] for g in grams], dtype="<f8").tobytes())
        ctxs = sorted(model.backoffs[k])
        parts.append(struct.pack("<I", len(ctxs)))
        parts.append(np.array(ctxs, dtype="<i4").reshape(-1).tobytes())
        parts.append(np.array([model.backoffs[k][c] for c in ctxs], dtype="<f8").tobytes())
    parts.append(_END)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise LMError("language model file is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(size * count), dtype=dtype)


def load_lm(path) -> NGramModel:
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(len(MAGIC)) != MAGIC:
        raise LMError(f"{path}: not a language model file (bad magic)")
    version, order = struct.unpack("<BB", r.take(2))
    if version != VERSION:
        raise LMError(f"{path}: unsupported version {version}")
    (n_vocab,) = struct.unpack("<I", r.take(4))
    names = {}
    for _ in range(n_vocab):
        i, length = struct.unpack("<iH", r.take(6))
        name = r.take(length).decode("utf-8")
        names[i] = name
    vocab = frozenset(names)
    names = {i: n for i, n in names.items() if n}
    discounts = [float(x) for x in r.array("<f8", order)]
    probs, backoffs = {}, {}
    for k in range(1, order + 1):
        (n,) = struct.unpack("<I", r.take(4))
        grams = r.array("<i4", n * k).reshape(n, k)
        values = r.array("<f8", n)
        probs[k] = {tuple(int(x) for x in g): float(p) for g, p in zip(grams, values)}
        (m,) = struct.unpack("<I", r.take(4))
        ctxs = r.array("<i4", m * (k - 1)).reshape(m, k - 1)
        values = r.array("<f8", m)
        backoffs[k] = {tuple(int(x) for x in c): float(b) for c, b in zip(ctxs, values)}
    if r.take(len(_END)) != _END:
        raise LMError(f"{path}: missing end marker")
    return NGramModel(order, vocab, discounts, probs, backoffs, names)
