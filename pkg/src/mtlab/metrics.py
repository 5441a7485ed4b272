"""Automatic translation metrics: BLEU, NIST, METEOR (exact match) and TER.

All functions take tokenized text (sequences of string tokens). Corpus-level
scores take parallel lists with one reference per hypothesis.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

Tokens = Sequence[str]

# NIST brevity factor reaches 0.5 when the hypothesis is 2/3 of the reference
NIST_BETA = math.log(0.5) / math.log(2.0 / 3.0) ** 2
NIST_RANGE = 15.0

METEOR_EXACT_LIMIT = 20
TER_MAX_SHIFT = 10


class MetricError(ValueError):
    pass


def ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _check_parallel(hypotheses, references) -> None:
    if len(hypotheses) != len(references):
        raise MetricError(
            f"{len(hypotheses)} hypotheses but {len(references)} references")


# -- BLEU -------------------------------------------------------------------

@dataclass
class BleuComponents:
    precisions: list[float | None]
    weights: list[float]
    matches: list[int]
    totals: list[int]
    max_order: int
    hyp_len: int
    ref_len: int
    brevity_penalty: float
    score: float


def clipped_ngram_counts(hypotheses: Sequence[Tokens], references: Sequence[Tokens],
                         max_order: int) -> tuple[list[int], list[int]]:
    """Corpus totals of clipped n-gram matches and hypothesis n-grams per order."""
    _check_parallel(hypotheses, references)
    matches = [0] * max_order
    totals = [0] * max_order
    for hyp, ref in zip(hypotheses, references):
        for n in range(1, max_order + 1):
            h = ngrams(hyp, n)
            r = ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    return matches, totals


def clipped_ngram_precisions(hypotheses: Sequence[Tokens], references: Sequence[Tokens],
                             max_order: int = 4) -> list[float | None]:
    """p_n for n = 1..max_order; ``None`` where the hypotheses have no n-grams."""
    matches, totals = clipped_ngram_counts(hypotheses, references, max_order)
    return [m / t if t else None for m, t in zip(matches, totals)]


def brevity_penalty(c: int, r: int) -> float:
    if c > r:
        return 1.0
    if c <= 0:
        return 0.0
    return math.exp(1.0 - r / c)


def bleu_components(hypotheses: Sequence[Tokens], references: Sequence[Tokens],
                    max_order: int = 4, weights: Sequence[float] | None = None) -> BleuComponents:
    if not hypotheses:
        raise MetricError("BLEU needs at least one hypothesis")
    if weights is None:
        weights = [1.0 / max_order] * max_order
    weights = list(weights)
    if len(weights) != max_order or any(w < 0 for w in weights) \
            or abs(sum(weights) - 1.0) > 1e-12:
        raise MetricError("weights must be nonnegative, one per order, and sum to 1")
    matches, totals = clipped_ngram_counts(hypotheses, references, max_order)
    precisions = [m / t if t else None for m, t in zip(matches, totals)]
    c = sum(len(h) for h in hypotheses)
    r = sum(len(x) for x in references)
    bp = brevity_penalty(c, r)

    included = [(w, p) for w, p in zip(weights, precisions) if p is not None and w > 0]
    if not included or any(p == 0.0 for _, p in included):
        score = 0.0
    else:
        wsum = sum(w for w, _ in included)
        score = 100.0 * bp * math.exp(sum(w / wsum * math.log(p) for w, p in included))
    return BleuComponents(precisions, weights, matches, totals, max_order, c, r, bp, score)


def bleu(hypotheses: Sequence[Tokens], references: Sequence[Tokens], max_order: int = 4,
         weights: Sequence[float] | None = None) -> float:
    """Corpus BLEU as a percentage (no smoothing)."""
    return bleu_components(hypotheses, references, max_order, weights).score


# -- NIST -------------------------------------------------------------------

@dataclass
class NistComponents:
    per_order: list[float]
    hyp_len: int
    ref_len: int
    brevity_factor: float
    score: float


def nist_information(references: Sequence[Tokens], max_order: int = 5) -> dict[tuple, float]:
    """Information weight of every reference n-gram, in bits."""
    counts: Counter = Counter()
    total_words = 0
    for ref in references:
        total_words += len(ref)
        for n in range(1, max_order + 1):
            counts.update(ngrams(ref, n))
    info = {}
    for gram, c in counts.items():
        prefix = counts[gram[:-1]] if len(gram) > 1 else total_words
        info[gram] = math.log2(prefix / c)
    return info


def nist_brevity(hyp_len: int, ref_len: int) -> float:
    ratio = min(hyp_len / ref_len, 1.0) if ref_len else 0.0
    if ratio <= 0.0:
        return 0.0
    return math.exp(NIST_BETA * math.log(ratio) ** 2)


def nist_components(hypotheses: Sequence[Tokens], references: Sequence[Tokens],
                    max_order: int = 5) -> NistComponents:
    _check_parallel(hypotheses, references)
    ref_len = sum(len(r) for r in references)
    if ref_len == 0:
        raise MetricError("NIST needs a non-empty reference corpus")
    info = nist_information(references, max_order)
    gained = [0.0] * max_order
    totals = [0] * max_order
    for hyp, ref in zip(hypotheses, references):
        for n in range(1, max_order + 1):
            h = ngrams(hyp, n)
            r = ngrams(ref, n)
            totals[n - 1] += max(len(hyp) - n + 1, 0)
            for g, c in h.items():
                m = min(c, r[g])
                if m:
                    gained[n - 1] += m * info[g]
    per_order = [g / t if t else 0.0 for g, t in zip(gained, totals)]
    hyp_len = sum(len(h) for h in hypotheses)
    bf = nist_brevity(hyp_len, ref_len)
    return NistComponents(per_order, hyp_len, ref_len, bf, sum(per_order) * bf)


def nist(hypotheses: Sequence[Tokens], references: Sequence[Tokens], max_order: int = 5) -> float:
    """Raw corpus NIST score (information-weighted n-gram matches)."""
    return nist_components(hypotheses, references, max_order).score


def scale_nist(raw: float) -> float:
    return raw / NIST_RANGE * 100.0


# -- METEOR -----------------------------------------------------------------

@dataclass
class MeteorComponents:
    matches: int
    hyp_len: int
    ref_len: int
    precision: float
    recall: float
    chunks: int
    penalty: float
    fmean: float
    score: float


def _count_chunks(alignment: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in sorted(alignment):
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def _greedy_alignment(hyp: Tokens, ref: Tokens) -> list[tuple[int, int]]:
    positions: dict[str, list[int]] = {}
    for j, w in enumerate(ref):
        positions.setdefault(w, []).append(j)
    used: set[int] = set()
    out = []
    prev_j = None
    for i, w in enumerate(hyp):
        free = [j for j in positions.get(w, ()) if j not in used]
        if not free:
            continue
        j = prev_j + 1 if prev_j is not None and prev_j + 1 in free else free[0]
        used.add(j)
        out.append((i, j))
        prev_j = j
    return out


def _exact_alignment(hyp: Tokens, ref: Tokens) -> list[tuple[int, int]]:
    """Maximum-cardinality exact matching with the fewest chunks (memoized search)."""
    hc, rc = Counter(hyp), Counter(ref)
    need = {w: min(hc[w], rc[w]) for w in hc if w in rc}
    positions = {w: [j for j, x in enumerate(ref) if x == w] for w in need}
    # hyp tokens of each word still to come after position i (inclusive)
    remaining = [None] * (len(hyp) + 1)
    acc: Counter = Counter()
    remaining[len(hyp)] = dict(acc)
    for i in range(len(hyp) - 1, -1, -1):
        acc[hyp[i]] += 1
        remaining[i] = dict(acc)

    memo: dict = {}

    def solve(i: int, prev_j: int, used: int, left: tuple) -> tuple[float, tuple]:
        # left: per-word matches still required, as a sorted tuple of items
        if i == len(hyp):
            return (0, ()) if all(k == 0 for _, k in left) else (math.inf, ())
        key = (i, prev_j, used)
        if key in memo:
            return memo[key]
        w = hyp[i]
        left_d = dict(left)
        best: tuple[float, tuple] = (math.inf, ())
        k = left_d.get(w, 0)
        if k > 0:
            ld = dict(left_d)
            ld[w] = k - 1
            nleft = tuple(sorted(ld.items()))
            for j in positions[w]:
                if used >> j & 1:
                    continue
                cost, rest = solve(i + 1, j, used | (1 << j), nleft)
                cost += 0 if j == prev_j + 1 and prev_j >= 0 else 1
                if cost < best[0]:
                    best = (cost, ((i, j),) + rest)
        # leaving this token unmatched is only allowed if enough copies remain
        if k <= remaining[i + 1].get(w, 0):
            cost, rest = solve(i + 1, -2, used, left)
            if cost < best[0]:
                best = (cost, rest)
        memo[key] = best
        return best

    start = tuple(sorted(need.items()))
    _, alignment = solve(0, -2, 0, start)
    return list(alignment)


def meteor_alignment(hyp: Tokens, ref: Tokens) -> list[tuple[int, int]]:
    m = sum((Counter(hyp) & Counter(ref)).values())
    if m <= METEOR_EXACT_LIMIT:
        return _exact_alignment(hyp, ref)
    return _greedy_alignment(hyp, ref)


def _meteor_from_counts(m: int, hyp_len: int, ref_len: int, chunks: int) -> MeteorComponents:
    if m == 0:
        return MeteorComponents(0, hyp_len, ref_len, 0.0, 0.0, 0, 0.0, 0.0, 0.0)
    p = m / hyp_len
    r = m / ref_len
    fmean = 10.0 * p * r / (r + 9.0 * p)
    penalty = 0.5 * (chunks / m) ** 3
    return MeteorComponents(m, hyp_len, ref_len, p, r, chunks, penalty, fmean,
                            100.0 * fmean * (1.0 - penalty))


def meteor_components(hypothesis: Tokens, reference: Tokens) -> MeteorComponents:
    alignment = meteor_alignment(hypothesis, reference)
    return _meteor_from_counts(len(alignment), len(hypothesis), len(reference),
                               _count_chunks(alignment))


def meteor(hypothesis: Tokens, reference: Tokens) -> float:
    """Exact-match METEOR of one segment, as a percentage."""
    return meteor_components(hypothesis, reference).score


def corpus_meteor_components(hypotheses: Sequence[Tokens],
                             references: Sequence[Tokens]) -> MeteorComponents:
    """Corpus METEOR: matches, lengths and chunks summed over segments."""
    _check_parallel(hypotheses, references)
    m = hl = rl = ch = 0
    for hyp, ref in zip(hypotheses, references):
        c = meteor_components(hyp, ref)
        m += c.matches
        hl += c.hyp_len
        rl += c.ref_len
        ch += c.chunks
    return _meteor_from_counts(m, hl, rl, ch)


def corpus_meteor(hypotheses: Sequence[Tokens], references: Sequence[Tokens]) -> float:
    return corpus_meteor_components(hypotheses, references).score


# -- TER --------------------------------------------------------------------

@dataclass
class TerComponents:
    edits: int
    ref_len: int
    shifts: int
    score: float


def levenshtein(a: Sequence, b: Sequence) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def _aligned_ref_to_hyp(hyp: Sequence, ref: Sequence) -> dict[int, int]:
    """Map reference positions to the hypothesis positions they are matched or
    substituted with on one minimum edit path."""
    n, m = len(hyp), len(ref)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]))
    out = {}
    i, j = n, m
    while i > 0 and j > 0:
        if d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            out[j - 1] = i - 1
            i, j = i - 1, j - 1
        elif d[i][j] == d[i - 1][j] + 1:
            i -= 1
        else:
            j -= 1
    return out


def _shift_candidates(hyp: list, ref: Sequence):
    """Yield (span length, origin, destination, shifted hypothesis).

    A span qualifies when it occurs verbatim somewhere in the reference; it is
    moved so that it lands where that reference occurrence sits, either at the
    same index or right after the hypothesis word aligned to the preceding
    reference word.
    """
    align = _aligned_ref_to_hyp(hyp, ref)
    for i in range(len(hyp)):
        for k in range(1, TER_MAX_SHIFT + 1):
            if i + k > len(hyp):
                break
            span = hyp[i:i + k]
            rest = hyp[:i] + hyp[i + k:]
            dests = set()
            for j in range(len(ref) - k + 1):
                if ref[j:j + k] != span:
                    continue
                dests.add(min(j, len(rest)))
                if j == 0:
                    dests.add(0)
                elif j - 1 in align:
                    a = align[j - 1]
                    if a < i:
                        dests.add(a + 1)
                    elif a >= i + k:
                        dests.add(a + 1 - k)
            for d in sorted(dests):
                if d == i:
                    continue
                yield k, i, d, rest[:d] + span + rest[d:]


def ter_components(hypothesis: Tokens, reference: Tokens) -> TerComponents:
    if len(reference) == 0:
        raise MetricError("TER needs a non-empty reference")
    hyp = list(hypothesis)
    ref = list(reference)
    shifts = 0
    dist = levenshtein(hyp, ref)
    while dist > 0:
        best = None
        for k, i, d, shifted in _shift_candidates(hyp, ref):
            new = levenshtein(shifted, ref)
            gain = dist - new
            # a shift costs one edit itself, so it must save at least two
            if gain <= 1:
                continue
            key = (-gain, -k, i, d)
            if best is None or key < best[0]:
                best = (key, shifted, new)
        if best is None:
            break
        _, hyp, dist = best
        shifts += 1
    edits = shifts + dist
    return TerComponents(edits, len(ref), shifts, 100.0 * edits / len(ref))


def ter(hypothesis: Tokens, reference: Tokens) -> float:
    """Translation edit rate of one segment, as a percentage (lower is better)."""
    return ter_components(hypothesis, reference).score


def corpus_ter_components(hypotheses: Sequence[Tokens],
                          references: Sequence[Tokens]) -> TerComponents:
    """Corpus TER: total edits over total reference length."""
    _check_parallel(hypotheses, references)
    edits = shifts = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        c = ter_components(hyp, ref)
        edits += c.edits
        shifts += c.shifts
        ref_len += c.ref_len
    if ref_len == 0:
        raise MetricError("TER needs a non-empty reference corpus")
    return TerComponents(edits, ref_len, shifts, 100.0 * edits / ref_len)


def corpus_ter(hypotheses: Sequence[Tokens], references: Sequence[Tokens]) -> float:
    return corpus_ter_components(hypotheses, references).score


# -- interpretation and reports --------------------------------------------

BLEU_BANDS = ((15.0, "unusable"), (30.0, "post-editing required"),
              (50.0, "understandable"), (math.inf, "good, fluent"))


def interpret_bleu(score: float) -> str:
    if score < 0:
        raise MetricError("BLEU score must be nonnegative")
    for upper, label in BLEU_BANDS:
        if score < upper:
            return label
    return BLEU_BANDS[-1][1]


@dataclass
class MetricReport:
    bleu: float
    nist_raw: float
    nist_scaled: float
    meteor: float
    ter: float
    components: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, bleu: float, nist_scaled: float, meteor: float,
                    ter: float) -> "MetricReport":
        """Report from already-scaled 0-100 values (e.g. published tables)."""
        return cls(bleu, nist_scaled / 100.0 * NIST_RANGE, nist_scaled, meteor, ter)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def score_corpus(hypotheses: Sequence[Tokens], references: Sequence[Tokens]) -> MetricReport:
    """All four metrics on one hypothesis/reference corpus."""
    _check_parallel(hypotheses, references)
    b = bleu_components(hypotheses, references)
    n = nist_components(hypotheses, references)
    m = corpus_meteor_components(hypotheses, references)
    t = corpus_ter_components(hypotheses, references)
    return MetricReport(
        bleu=b.score, nist_raw=n.score, nist_scaled=scale_nist(n.score),
        meteor=m.score, ter=t.score,
        components={"bleu": asdict(b), "nist": asdict(n), "meteor": asdict(m), "ter": asdict(t)},
    )


def sentence_scores(metric: str, hypotheses: Sequence[Tokens],
                    references: Sequence[Tokens]) -> list[float]:
    """Per-segment scores for one metric (used by the one-per-line output mode)."""
    _check_parallel(hypotheses, references)
    funcs = {
        "bleu": lambda h, r: bleu([h], [r]) if h else 0.0,
        "nist": lambda h, r: nist([h], [r]),
        "meteor": meteor,
        "ter": ter,
    }
    if metric not in funcs:
        raise MetricError(f"unknown metric {metric!r}")
    return [funcs[metric](h, r) for h, r in zip(hypotheses, references)]
