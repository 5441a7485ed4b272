"""Word alignment, symmetrization, phrase extraction and reordering models.

IBM Model 1 (with a null word) learns lexical translation tables in both
directions; Viterbi alignments from the two directions are merged with
grow-diag-final; phrase pairs consistent with the merged alignment are
extracted and scored, and a lexicalized msd-bidirectional-fe reordering
table is estimated from the same extraction.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import ParallelCorpus, SentencePair

NULL = "<null>"
ORIENTATIONS = ("M", "S", "D")


class AlignError(ValueError):
    pass


# -- IBM Model 1 ------------------------------------------------------------

@dataclass
class TranslationTable:
    """Lexical probabilities t(f | e); ``e`` may be the null word."""

    probs: dict[str, dict[str, float]]
    log_likelihood: list[float] = field(default_factory=list)

    def t(self, f: str, e: str) -> float:
        return self.probs.get(e, {}).get(f, 0.0)


def _ibm1_log_likelihood(t_flat: np.ndarray, index: list[np.ndarray]) -> float:
    ll = 0.0
    for idx in index:
        probs = t_flat[idx]
        ll += float(np.sum(np.log(probs.sum(axis=1) / idx.shape[1])))
    return ll


def train_ibm1(corpus: ParallelCorpus, iterations: int = 5) -> TranslationTable:
    """Estimate t(source word | target word) with EM from a uniform start.

    ``log_likelihood`` holds the corpus log-likelihood under the parameters
    in force before each iteration, followed by the final value.
    """
    if len(corpus) == 0:
        raise AlignError("cannot train on an empty corpus")
    if iterations < 1:
        raise AlignError("iterations must be >= 1")
    f_ids: dict[str, int] = {}
    e_ids: dict[str, int] = {NULL: 0}
    for p in corpus.pairs:
        for f in p.source:
            f_ids.setdefault(f, len(f_ids))
        for e in p.target:
            e_ids.setdefault(e, len(e_ids))

    # sparse parameter vector over co-occurring (f, e) pairs
    param_of: dict[tuple[int, int], int] = {}
    index: list[np.ndarray] = []
    for p in corpus.pairs:
        fs = [f_ids[f] for f in p.source]
        es = [0] + [e_ids[e] for e in p.target]
        idx = np.empty((len(fs), len(es)), dtype=np.int64)
        for a, f in enumerate(fs):
            for b, e in enumerate(es):
                idx[a, b] = param_of.setdefault((f, e), len(param_of))
        index.append(idx)
    e_of_param = np.empty(len(param_of), dtype=np.int64)
    f_of_param = np.empty(len(param_of), dtype=np.int64)
    for (f, e), k in param_of.items():
        e_of_param[k] = e
        f_of_param[k] = f

    t_flat = np.full(len(param_of), 1.0 / len(f_ids))
    history = []
    for _ in range(iterations):
        history.append(_ibm1_log_likelihood(t_flat, index))
        counts = np.zeros_like(t_flat)
        for idx in index:
            probs = t_flat[idx]
            post = probs / probs.sum(axis=1, keepdims=True)
            np.add.at(counts, idx.ravel(), post.ravel())
        totals = np.bincount(e_of_param, weights=counts, minlength=len(e_ids))
        t_flat = counts / totals[e_of_param]
    history.append(_ibm1_log_likelihood(t_flat, index))

    f_names = {i: f for f, i in f_ids.items()}
    e_names = {i: e for e, i in e_ids.items()}
    probs: dict[str, dict[str, float]] = defaultdict(dict)
    for k in range(len(t_flat)):
        probs[e_names[int(e_of_param[k])]][f_names[int(f_of_param[k])]] = float(t_flat[k])
    return TranslationTable(dict(probs), history)


# -- alignment matrices -----------------------------------------------------

@dataclass(frozen=True)
class AlignmentMatrix:
    source_len: int
    target_len: int
    points: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "points", frozenset(self.points))
        for i, j in self.points:
            if not (0 <= i < self.source_len and 0 <= j < self.target_len):
                raise AlignError(f"point {(i, j)} outside {self.source_len}x{self.target_len}")

    def _check(self, other: "AlignmentMatrix") -> None:
        if (self.source_len, self.target_len) != (other.source_len, other.target_len):
            raise AlignError(
                f"dimension mismatch: {self.source_len}x{self.target_len} vs "
                f"{other.source_len}x{other.target_len}")

    def to_text(self) -> str:
        return " ".join(f"{i}-{j}" for i, j in sorted(self.points))

    @classmethod
    def from_text(cls, line: str, source_len: int, target_len: int) -> "AlignmentMatrix":
        points = []
        for item in line.split():
            i, j = item.split("-")
            points.append((int(i), int(j)))
        return cls(source_len, target_len, frozenset(points))


def viterbi_align(table: TranslationTable, pair: SentencePair,
                  direction: str = "fwd") -> AlignmentMatrix:
    """Best alignment under IBM Model 1.

    ``fwd``: each source word links to its most probable target word, with
    ``table`` holding t(source | target). ``rev``: each target word links to
    its most probable source word, with ``table`` trained on the reversed
    corpus. Ties go to the lowest index; a word is left unaligned only when
    the null word is strictly better.
    """
    if direction not in ("fwd", "rev"):
        raise AlignError(f"direction must be 'fwd' or 'rev', not {direction!r}")
    src, tgt = pair.source, pair.target
    if direction == "fwd":
        generated, conditioning = src, tgt
    else:
        generated, conditioning = tgt, src
    points = set()
    for a, word in enumerate(generated):
        best_b, best_p = -1, -1.0
        for b, cond in enumerate(conditioning):
            p = table.t(word, cond)
            if p > best_p:
                best_b, best_p = b, p
        if table.t(word, NULL) > best_p or best_b < 0:
            continue
        points.add((a, best_b) if direction == "fwd" else (best_b, a))
    return AlignmentMatrix(len(src), len(tgt), frozenset(points))


def intersect(a: AlignmentMatrix, b: AlignmentMatrix) -> AlignmentMatrix:
    a._check(b)
    return AlignmentMatrix(a.source_len, a.target_len, a.points & b.points)


def union(a: AlignmentMatrix, b: AlignmentMatrix) -> AlignmentMatrix:
    a._check(b)
    return AlignmentMatrix(a.source_len, a.target_len, a.points | b.points)


_NEIGHBOURS = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]


def grow_diag_final(fwd: AlignmentMatrix, rev: AlignmentMatrix) -> AlignmentMatrix:
    """Symmetrize two directional alignments.

    Starts from the intersection, grows into neighbouring (including
    diagonal) union points that cover a still-unaligned word, then adds any
    remaining union point touching an unaligned word. Union points are
    always scanned in ascending (target, source) order.
    """
    fwd._check(rev)
    current = set(fwd.points & rev.points)
    candidates = sorted(fwd.points ^ rev.points, key=lambda p: (p[1], p[0]))
    src_aligned = Counter(i for i, _ in current)
    tgt_aligned = Counter(j for _, j in current)

    def add(point):
        current.add(point)
        src_aligned[point[0]] += 1
        tgt_aligned[point[1]] += 1

    added = True
    while added:
        added = False
        for i, j in candidates:
            if (i, j) in current:
                continue
            if src_aligned[i] and tgt_aligned[j]:
                continue
            if any((i + di, j + dj) in current for di, dj in _NEIGHBOURS):
                add((i, j))
                added = True
    for i, j in candidates:
        if (i, j) not in current and (not src_aligned[i] or not tgt_aligned[j]):
            add((i, j))
    return AlignmentMatrix(fwd.source_len, fwd.target_len, frozenset(current))


def symmetrized_alignments(corpus: ParallelCorpus, fwd_table: TranslationTable,
                           rev_table: TranslationTable) -> list[AlignmentMatrix]:
    return [grow_diag_final(viterbi_align(fwd_table, p, "fwd"),
                            viterbi_align(rev_table, p, "rev"))
            for p in corpus.pairs]


# -- phrase extraction ------------------------------------------------------

@dataclass(frozen=True)
class PhrasePair:
    source_span: tuple[int, int]   # inclusive
    target_span: tuple[int, int]   # inclusive
    source: tuple[str, ...]
    target: tuple[str, ...]
    alignment: frozenset = frozenset()   # points relative to the span starts


def extract_phrases(pair: SentencePair, alignment: AlignmentMatrix,
                    max_len: int = 7) -> list[PhrasePair]:
    """All phrase pairs (up to ``max_len`` words per side) consistent with the alignment."""
    src, tgt = pair.source, pair.target
    if (alignment.source_len, alignment.target_len) != (len(src), len(tgt)):
        raise AlignError("alignment dimensions do not match the sentence pair")
    tgt_aligned = [False] * len(tgt)
    for _, j in alignment.points:
        tgt_aligned[j] = True
    out = []
    for s1 in range(len(src)):
        for s2 in range(s1, min(len(src), s1 + max_len)):
            linked = [j for i, j in alignment.points if s1 <= i <= s2]
            if not linked:
                continue
            t1, t2 = min(linked), max(linked)
            if t2 - t1 + 1 > max_len:
                continue
            if any(t1 <= j <= t2 and not s1 <= i <= s2 for i, j in alignment.points):
                continue
            ts = t1
            while True:
                te = t2
                while True:
                    if te - ts + 1 > max_len:
                        break
                    inside = frozenset((i - s1, j - ts) for i, j in alignment.points
                                       if s1 <= i <= s2)
                    out.append(PhrasePair((s1, s2), (ts, te), tuple(src[s1:s2 + 1]),
                                          tuple(tgt[ts:te + 1]), inside))
                    te += 1
                    if te >= len(tgt) or tgt_aligned[te]:
                        break
                ts -= 1
                if ts < 0 or tgt_aligned[ts]:
                    break
    return out


# -- phrase table -----------------------------------------------------------

@dataclass
class PhraseTable:
    """Scored phrase pairs: (φ(f|e), lex(f|e), φ(e|f), lex(e|f)) per entry."""

    entries: dict[tuple[tuple[str, ...], tuple[str, ...]], tuple[float, float, float, float]]

    def options(self, source: tuple[str, ...]) -> list[tuple[tuple[str, ...], tuple]]:
        return self.by_source().get(source, [])

    def by_source(self) -> dict:
        cache = getattr(self, "_by_source", None)
        if cache is None:
            cache = defaultdict(list)
            for (f, e), scores in sorted(self.entries.items()):
                cache[f].append((e, scores))
            self._by_source = dict(cache)
            cache = self._by_source
        return cache

    def max_source_len(self) -> int:
        return max((len(f) for f, _ in self.entries), default=0)

    def __len__(self) -> int:
        return len(self.entries)


def _lexical_weight(generated: Sequence[str], conditioning: Sequence[str],
                    points: Iterable[tuple[int, int]], table: TranslationTable) -> float:
    """Product over generated words of the mean t(word | linked words),
    falling back to t(word | null) for unaligned words."""
    links = defaultdict(list)
    for a, b in points:
        links[a].append(b)
    weight = 1.0
    for a, word in enumerate(generated):
        if links[a]:
            weight *= sum(table.t(word, conditioning[b]) for b in links[a]) / len(links[a])
        else:
            weight *= table.t(word, NULL)
    return weight


_LEX_FLOOR = 1e-10


def score_phrases(phrases: Iterable[PhrasePair], fwd_table: TranslationTable,
                  rev_table: TranslationTable) -> PhraseTable:
    """Relative-frequency phrase probabilities plus lexical weights.

    ``fwd_table`` holds t(source | target), ``rev_table`` t(target | source).
    When one phrase pair was seen with several internal alignments, the
    highest lexical weight is kept.
    """
    pair_count: Counter = Counter()
    src_count: Counter = Counter()
    tgt_count: Counter = Counter()
    lex_fe: dict = {}
    lex_ef: dict = {}
    for ph in phrases:
        key = (ph.source, ph.target)
        pair_count[key] += 1
        src_count[ph.source] += 1
        tgt_count[ph.target] += 1
        lfe = _lexical_weight(ph.source, ph.target, ph.alignment, fwd_table)
        lef = _lexical_weight(ph.target, ph.source, ((j, i) for i, j in ph.alignment), rev_table)
        lex_fe[key] = max(lex_fe.get(key, 0.0), lfe)
        lex_ef[key] = max(lex_ef.get(key, 0.0), lef)
    if not pair_count:
        raise AlignError("no phrase pairs to score")
    entries = {}
    for key, c in pair_count.items():
        f, e = key
        entries[key] = (c / tgt_count[e], max(lex_fe[key], _LEX_FLOOR),
                        c / src_count[f], max(lex_ef[key], _LEX_FLOOR))
    return PhraseTable(entries)


def write_phrase_table(table: PhraseTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (f, e), scores in sorted(table.entries.items()):
            fh.write(f"{' '.join(f)} ||| {' '.join(e)} ||| "
                     + " ".join(repr(float(s)) for s in scores) + "\n")


def read_phrase_table(path) -> PhraseTable:
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = [x.strip() for x in line.rstrip("\n").split("|||")]
            if len(fields) != 3:
                raise AlignError(f"{path}:{lineno}: expected 3 fields")
            scores = tuple(float(x) for x in fields[2].split())
            if len(scores) != 4:
                raise AlignError(f"{path}:{lineno}: expected 4 scores")
            entries[(tuple(fields[0].split()), tuple(fields[1].split()))] = scores
    return PhraseTable(entries)


# -- lexicalized reordering -------------------------------------------------

@dataclass
class ReorderingTable:
    """P(M), P(S), P(D) w.r.t. the previous and the next phrase, per phrase pair."""

    entries: dict[tuple[tuple[str, ...], tuple[str, ...]], tuple[float, ...]]
    smoothing: float = 0.5

    def get(self, source: tuple[str, ...], target: tuple[str, ...]) -> tuple[float, ...]:
        return self.entries.get((source, target), (1 / 3,) * 6)


def phrase_orientations(phrases: Sequence[PhrasePair], source_len: int,
                        target_len: int) -> list[tuple[str, str]]:
    """(previous, next) orientation of every extracted phrase in one sentence.

    The previous phrase is any extracted phrase ending right before this one
    on the target side: monotone if its source side ends right before ours,
    swap if it starts right after ours, discontinuous otherwise. The next
    direction mirrors this. Sentence boundaries act as a phrase at source
    position -1 (start) or ``source_len`` (end).
    """
    by_tgt_end = defaultdict(list)
    by_tgt_start = defaultdict(list)
    for ph in phrases:
        by_tgt_end[ph.target_span[1]].append(ph.source_span)
        by_tgt_start[ph.target_span[0]].append(ph.source_span)
    out = []
    for ph in phrases:
        (s1, s2), (t1, t2) = ph.source_span, ph.target_span
        if t1 == 0:
            prev = "M" if s1 == 0 else "D"
        else:
            spans = by_tgt_end.get(t1 - 1, [])
            if any(b == s1 - 1 for _, b in spans):
                prev = "M"
            elif any(a == s2 + 1 for a, _ in spans):
                prev = "S"
            else:
                prev = "D"
        if t2 == target_len - 1:
            nxt = "M" if s2 == source_len - 1 else "D"
        else:
            spans = by_tgt_start.get(t2 + 1, [])
            if any(a == s2 + 1 for a, _ in spans):
                nxt = "M"
            elif any(b == s1 - 1 for _, b in spans):
                nxt = "S"
            else:
                nxt = "D"
        out.append((prev, nxt))
    return out


def train_reordering(sentences: Iterable[tuple[Sequence[PhrasePair], int, int]],
                     smoothing: float = 0.5) -> ReorderingTable:
    """Estimate msd-bidirectional-fe probabilities.

    ``sentences`` yields ``(phrases, source_len, target_len)`` per sentence.
    Counts are smoothed additively per orientation and normalized within
    each direction.
    """
    counts: dict = defaultdict(lambda: [0.0] * 6)
    for phrases, slen, tlen in sentences:
        for ph, (prev, nxt) in zip(phrases, phrase_orientations(phrases, slen, tlen)):
            c = counts[(ph.source, ph.target)]
            c[ORIENTATIONS.index(prev)] += 1
            c[3 + ORIENTATIONS.index(nxt)] += 1
    entries = {}
    for key, c in counts.items():
        probs = []
        for block in (c[:3], c[3:]):
            total = sum(block) + 3 * smoothing
            probs.extend((x + smoothing) / total for x in block)
        entries[key] = tuple(probs)
    return ReorderingTable(entries, smoothing)


def write_reordering_table(table: ReorderingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (f, e), probs in sorted(table.entries.items()):
            fh.write(f"{' '.join(f)} ||| {' '.join(e)} ||| "
                     + " ".join(repr(float(p)) for p in probs) + "\n")


def read_reordering_table(path) -> ReorderingTable:
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = [x.strip() for x in line.rstrip("\n").split("|||")]
            probs = tuple(float(x) for x in fields[-1].split())
            if len(fields) != 3 or len(probs) != 6:
                raise AlignError(f"{path}:{lineno}: malformed reordering entry")
            entries[(tuple(fields[0].split()), tuple(fields[1].split()))] = probs
    return ReorderingTable(entries)


def train_phrase_models(corpus: ParallelCorpus, iterations: int = 5, max_phrase_len: int = 7,
                        smoothing: float = 0.5):
    """Full alignment-to-tables chain on a tokenized corpus.

    Returns ``(phrase_table, reordering_table, alignments, (fwd, rev))``.
    """
    fwd = train_ibm1(corpus, iterations)
    rev = train_ibm1(corpus.reversed(), iterations)
    alignments = symmetrized_alignments(corpus, fwd, rev)
    all_phrases = []
    per_sentence = []
    for pair, al in zip(corpus.pairs, alignments):
        phrases = extract_phrases(pair, al, max_phrase_len)
        all_phrases.extend(phrases)
        per_sentence.append((phrases, len(pair.source), len(pair.target)))
    table = score_phrases(all_phrases, fwd, rev)
    reordering = train_reordering(per_sentence, smoothing)
    return table, reordering, alignments, (fwd, rev)

