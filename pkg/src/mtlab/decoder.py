"""Phrase-based stack decoding with a log-linear model.

Features (all additive over a derivation, higher is better):

==============  ==========================================================
phi_fe, lex_fe  ln φ(f|e), ln lex(f|e) of each phrase used
phi_ef, lex_ef  ln φ(e|f), ln lex(e|f)
lm              log10 language model probability, end marker included
word_penalty    minus the number of target words
distortion      minus |jump| between consecutive source spans
ro_prev_{m,s,d} ln P(orientation | pair) w.r.t. the previous phrase
ro_next_{m,s,d} ln P(orientation | pair) w.r.t. the next phrase
unknown         minus the number of source words passed through untranslated
==============  ==========================================================
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

from .align import ORIENTATIONS, PhraseTable, ReorderingTable
from .corpus import EOS_ID
from .lm import LmState, NGramModel

FEATURES = (
    "phi_fe", "lex_fe", "phi_ef", "lex_ef", "lm", "word_penalty", "distortion",
    "ro_prev_m", "ro_prev_s", "ro_prev_d", "ro_next_m", "ro_next_s", "ro_next_d",
    "unknown",
)
_RO_PREV = 7
_RO_NEXT = 10
_UNKNOWN = 13


class DecodeError(RuntimeError):
    pass


@dataclass
class DecoderConfig:
    weights: dict[str, float] = field(default_factory=lambda: {f: 1.0 for f in FEATURES})
    beam_size: int = 100
    distortion_limit: int | None = 6
    ttable_limit: int = 20

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        unknown = set(self.weights) - set(FEATURES)
        if unknown:
            raise ValueError(f"unknown feature weights: {sorted(unknown)}")
        full = {f: 1.0 for f in FEATURES}
        full.update(self.weights)
        if not all(math.isfinite(v) for v in full.values()):
            raise ValueError("weights must be finite")
        self.weights = full

    def vector(self) -> tuple[float, ...]:
        return tuple(self.weights[f] for f in FEATURES)

    @classmethod
    def from_json(cls, path) -> "DecoderConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if "weights" not in data:
            data = {"weights": data}
        return cls(**data)


@dataclass(frozen=True)
class TranslationOption:
    span: tuple[int, int]            # inclusive source span
    source: tuple[str, ...]
    target: tuple[str, ...]
    scores: tuple[float, float, float, float]   # ln of the four table scores
    reordering: tuple[float, ...]    # ln of the six orientation probabilities
    passthrough: bool = False
    estimate: float = 0.0            # context-free weighted score


@dataclass(frozen=True)
class Step:
    span: tuple[int, int]
    source: tuple[str, ...]
    target: tuple[str, ...]
    orientation: str
    features: tuple[float, ...]


@dataclass
class Hypothesis:
    coverage: int
    lm_state: LmState
    last_span: tuple[int, int] | None
    last_option: TranslationOption | None
    score: float
    features: tuple[float, ...]
    future: float
    output: tuple[str, ...]
    steps: tuple[Step, ...]

    def sort_key(self):
        return (-(self.score + self.future), self.output, tuple(s.span for s in self.steps))


@dataclass
class DecodeResult:
    target: list[str]
    derivation: list[Step]
    features: dict[str, float]
    score: float

    def trace(self) -> dict:
        return {
            "target": " ".join(self.target),
            "score": self.score,
            "features": self.features,
            "derivation": [
                {"span": list(s.span), "source": " ".join(s.source),
                 "target": " ".join(s.target), "orientation": s.orientation,
                 "features": dict(zip(FEATURES, s.features))}
                for s in self.derivation
            ],
        }


def _ln(x: float) -> float:
    return math.log(x) if x > 0 else -1e9


def _dot(w: Sequence[float], f: Sequence[float]) -> float:
    return sum(a * b for a, b in zip(w, f) if b)


def _lm_context_free(lm: NGramModel, words: Sequence[str]) -> float:
    ids = [lm.word_id(w) for w in words]
    total = 0.0
    for i, w in enumerate(ids):
        p = lm.prob(w, ids[max(0, i - lm.order + 1):i])
        total += math.log10(p) if p > 0 else -1e9
    return total


class _Search:
    def __init__(self, source: Sequence[str], table: PhraseTable,
                 reordering: ReorderingTable, lm: NGramModel, config: DecoderConfig):
        if len(source) == 0:
            raise DecodeError("cannot decode an empty source sentence")
        self.src = tuple(source)
        self.n = len(self.src)
        self.table = table
        self.reordering = reordering
        self.lm = lm
        self.config = config
        self.w = config.vector()
        self.options = self._collect_options()
        self.future = _future_from_options(self.n, self.options)

    def _collect_options(self) -> dict[tuple[int, int], list[TranslationOption]]:
        w = self.w
        by_source = self.table.by_source()
        max_len = max(self.table.max_source_len(), 1)
        options: dict[tuple[int, int], list[TranslationOption]] = {}
        for a in range(self.n):
            for b in range(a, min(self.n, a + max_len)):
                f = self.src[a:b + 1]
                cands = []
                for e, sc in by_source.get(f, ()):
                    scores = tuple(_ln(x) for x in sc)
                    ro = tuple(_ln(x) for x in self.reordering.get(f, e))
                    est = (_dot(w[:4], scores) + w[4] * _lm_context_free(self.lm, e)
                           - w[5] * len(e))
                    cands.append(TranslationOption((a, b), f, e, scores, ro, False, est))
                cands.sort(key=lambda o: (-o.estimate, o.target))
                if cands:
                    options[(a, b)] = cands[:self.config.ttable_limit]
        for a in range(self.n):
            if (a, a) not in options:
                f = self.src[a:a + 1]
                ro = tuple(_ln(x) for x in self.reordering.get(f, f))
                est = w[4] * _lm_context_free(self.lm, f) - w[5] - w[_UNKNOWN]
                options[(a, a)] = [TranslationOption((a, a), f, f, (0.0,) * 4, ro, True, est)]
        return options

    def future_of(self, coverage: int) -> float:
        total = 0.0
        a = None
        for i in range(self.n + 1):
            free = i < self.n and not coverage >> i & 1
            if free and a is None:
                a = i
            elif not free and a is not None:
                total += self.future[a][i - 1]
                a = None
        return total

    def initial(self) -> Hypothesis:
        return Hypothesis(0, self.lm.initial_state(), None, None, 0.0,
                          (0.0,) * len(FEATURES), self.future_of(0), (), ())

    def expand(self, hyp: Hypothesis):
        full = (1 << self.n) - 1
        limit = self.config.distortion_limit
        last_end = hyp.last_span[1] if hyp.last_span else -1
        for (a, b), opts in self.options.items():
            mask = ((1 << (b + 1)) - 1) ^ ((1 << a) - 1)
            if hyp.coverage & mask:
                continue
            jump = a - (last_end + 1)
            if limit is not None and abs(jump) > limit:
                continue
            if hyp.last_span is None:
                orient = "M" if a == 0 else "D"
            elif a == last_end + 1:
                orient = "M"
            elif b == hyp.last_span[0] - 1:
                orient = "S"
            else:
                orient = "D"
            o = ORIENTATIONS.index(orient)
            coverage = hyp.coverage | mask
            done = coverage == full
            for opt in opts:
                delta = [0.0] * len(FEATURES)
                delta[0:4] = opt.scores
                lm_score = 0.0
                state = hyp.lm_state
                for word in opt.target:
                    wid = self.lm.word_id(word)
                    p = self.lm.prob(wid, state.context)
                    lm_score += math.log10(p) if p > 0 else -1e9
                    state = self.lm.next_state(state, wid)
                if done:
                    p = self.lm.prob(EOS_ID, state.context)
                    lm_score += math.log10(p) if p > 0 else -1e9
                delta[4] = lm_score
                delta[5] = -len(opt.target)
                delta[6] = -abs(jump)
                delta[_RO_PREV + o] += opt.reordering[o]
                if hyp.last_option is not None:
                    delta[_RO_NEXT + o] += hyp.last_option.reordering[3 + o]
                if done:
                    end_o = 0 if b == self.n - 1 else 2
                    delta[_RO_NEXT + end_o] += opt.reordering[3 + end_o]
                if opt.passthrough:
                    delta[_UNKNOWN] = -len(opt.source)
                features = tuple(x + d for x, d in zip(hyp.features, delta))
                step = Step((a, b), opt.source, opt.target, orient, tuple(delta))
                yield Hypothesis(coverage, state, (a, b), opt,
                                 hyp.score + _dot(self.w, delta), features,
                                 self.future_of(coverage), hyp.output + opt.target,
                                 hyp.steps + (step,))

    def run(self, keep_outputs: bool = False) -> list[Hypothesis]:
        """Stack search; returns the final stack sorted best first.

        With ``keep_outputs`` hypotheses are only merged when their outputs
        are identical too, so distinct translations survive for n-best lists.
        """
        stacks: list[dict] = [dict() for _ in range(self.n + 1)]
        first = self.initial()
        stacks[0][self._key(first, keep_outputs)] = first
        for k in range(self.n):
            stack = stacks[k]
            if not stack:
                continue
            beam = sorted(stack.values(), key=Hypothesis.sort_key)[:self.config.beam_size]
            stacks[k] = {self._key(h, keep_outputs): h for h in beam}
            for hyp in beam:
                for new in self.expand(hyp):
                    target = stacks[bin(new.coverage).count("1")]
                    key = self._key(new, keep_outputs)
                    old = target.get(key)
                    if old is None or new.sort_key() < old.sort_key():
                        target[key] = new
        final = sorted(stacks[self.n].values(), key=Hypothesis.sort_key)
        if not final:
            for k in range(self.n - 1, -1, -1):
                if stacks[k]:
                    best = min(stacks[k].values(), key=Hypothesis.sort_key)
                    missing = [i for i in range(self.n) if not best.coverage >> i & 1]
                    raise DecodeError(
                        f"no complete translation; source positions {missing[0]}-{missing[-1]} "
                        f"({' '.join(self.src[i] for i in missing)}) could not be covered "
                        f"under distortion limit {self.config.distortion_limit}")
        return final

    @staticmethod
    def _key(h: Hypothesis, keep_outputs: bool):
        key = (h.coverage, h.lm_state, h.last_span, h.last_option)
        return key + (h.output,) if keep_outputs else key


def _future_from_options(n: int, options) -> list[list[float]]:
    """best[a][b]: highest context-free score covering source span a..b."""
    best = [[-math.inf] * n for _ in range(n)]
    for length in range(1, n + 1):
        for a in range(n - length + 1):
            b = a + length - 1
            cands = [o.estimate for o in options.get((a, b), ())]
            val = max(cands) if cands else -math.inf
            for m in range(a, b):
                val = max(val, best[a][m] + best[m + 1][b])
            best[a][b] = val
    return best


def future_cost_table(source: Sequence[str], table: PhraseTable, lm: NGramModel,
                      config: DecoderConfig | None = None,
                      reordering: ReorderingTable | None = None) -> list[list[float]]:
    """Cheapest weighted cost (negated score) of translating each span a..b.

    Only entries with ``a <= b`` are meaningful.
    """
    config = config or DecoderConfig()
    reordering = reordering or ReorderingTable({})
    search = _Search(source, table, reordering, lm, config)
    return [[-x for x in row] for row in search.future]


def _result(h: Hypothesis) -> DecodeResult:
    return DecodeResult(list(h.output), list(h.steps), dict(zip(FEATURES, h.features)), h.score)


def decode(source: Sequence[str], table: PhraseTable, reordering: ReorderingTable,
           lm: NGramModel, config: DecoderConfig | None = None) -> DecodeResult:
    """Best translation of one tokenized source sentence."""
    config = config or DecoderConfig()
    search = _Search(source, table, reordering, lm, config)
    final = search.run()
    return _result(final[0])


def nbest(source: Sequence[str], table: PhraseTable, reordering: ReorderingTable,
          lm: NGramModel, config: DecoderConfig | None = None,
          n: int = 10) -> list[tuple[list[str], float]]:
    """Up to ``n`` distinct translations, best first (ties by target string)."""
    config = config or DecoderConfig()
    search = _Search(source, table, reordering, lm, config)
    final = search.run(keep_outputs=True)
    best: dict[tuple[str, ...], float] = {}
    for h in final:
        if h.output not in best or h.score > best[h.output]:
            best[h.output] = h.score
    ranked = heapq.nsmallest(n, best.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(list(out), score) for out, score in ranked]
