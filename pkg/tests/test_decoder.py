import math
import random

import pytest

from mtlab.align import PhraseTable, ReorderingTable
from mtlab.corpus import BOS_ID, EOS_ID, Vocabulary
from mtlab.decoder import (
    FEATURES, DecodeError, DecoderConfig, decode, future_cost_table, nbest,
)
from mtlab.lm import train_lm

import oracles

WIDE = dict(beam_size=1000, distortion_limit=None)


def tiny_lm(words=("x", "y", "cat")):
    voc = Vocabulary({w: 1 for w in words})
    sents = [[BOS_ID, voc.id(w), EOS_ID] for w in words]
    return train_lm(sents, order=2, vocabulary=voc)


def table(entries):
    return PhraseTable({(tuple(f.split()), tuple(e.split())): s for (f, e), s in entries.items()})


def test_single_option():
    pt = table({("kot", "cat"): (1.0, 1.0, 1.0, 1.0)})
    res = decode(["kot"], pt, ReorderingTable({}), tiny_lm())
    assert res.target == ["cat"]
    assert [s.span for s in res.derivation] == [(0, 0)]


def test_swap_orientation_dominates():
    pt = table({("a", "x"): (1.0,) * 4, ("b", "y"): (1.0,) * 4})
    ro = ReorderingTable({k: (0.01, 0.495, 0.495, 1 / 3, 1 / 3, 1 / 3) for k in pt.entries})
    cfg = DecoderConfig({"ro_prev_m": 5.0}, **WIDE)
    res = decode(["a", "b"], pt, ro, tiny_lm(), cfg)
    assert res.target == ["y", "x"]
    assert [s.orientation for s in res.derivation] == ["D", "S"]
    best = oracles.exhaustive_decode(("a", "b"), pt, ro, tiny_lm(), cfg.weights)
    assert max(best, key=best.get) == ("y", "x")


def test_unknown_word_passes_through():
    pt = table({("kot", "cat"): (1.0,) * 4})
    res = decode(["kot", "zzz"], pt, ReorderingTable({}), tiny_lm(), DecoderConfig(**WIDE))
    assert res.target == ["cat", "zzz"]
    assert res.features["unknown"] == -1.0


def test_empty_source():
    with pytest.raises(DecodeError):
        decode([], table({("a", "x"): (1.0,) * 4}), ReorderingTable({}), tiny_lm())


def test_zero_distortion_limit_forces_monotone():
    pt = table({("a", "x"): (1.0,) * 4, ("b", "y"): (1.0,) * 4})
    ro = ReorderingTable({k: (0.01, 0.495, 0.495, 1 / 3, 1 / 3, 1 / 3) for k in pt.entries})
    cfg = DecoderConfig({"ro_prev_m": 5.0}, distortion_limit=0)
    assert decode(["a", "b"], pt, ro, tiny_lm(), cfg).target == ["x", "y"]


class TestConfig:
    def test_defaults(self):
        cfg = DecoderConfig()
        assert cfg.beam_size == 100 and cfg.distortion_limit == 6
        assert cfg.vector() == (1.0,) * len(FEATURES)

    @pytest.mark.parametrize("kwargs", [{"beam_size": 0}, {"weights": {"bogus": 1.0}},
                                        {"weights": {"lm": math.inf}}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            DecoderConfig(**kwargs)

    def test_json(self, tmp_path):
        (tmp_path / "w.json").write_text('{"lm": 2.0}')
        assert DecoderConfig.from_json(tmp_path / "w.json").weights["lm"] == 2.0
        (tmp_path / "c.json").write_text('{"weights": {"lm": 3.0}, "beam_size": 7}')
        cfg = DecoderConfig.from_json(tmp_path / "c.json")
        assert cfg.weights["lm"] == 3.0 and cfg.beam_size == 7


def instances(seed, count):
    rng = random.Random(seed)
    return [oracles.random_decoder_instance(rng) for _ in range(count)]


def test_nbest_matches_oracle_top_n():
    for src, pt, ro, model, w in instances(4, 25):
        cfg = DecoderConfig(w, **WIDE)
        oracle = sorted(oracles.exhaustive_decode(src, pt, ro, model, w).items(),
                        key=lambda kv: (-kv[1], kv[0]))[:5]
        got = nbest(src, pt, ro, model, cfg, n=5)
        assert len(got) == len(oracle)
        for (out, score), (o_out, o_score) in zip(got, oracle):
            assert score == pytest.approx(o_score, abs=1e-9)
        assert [s for _, s in got] == sorted((s for _, s in got), reverse=True)


def test_nbest_one_equals_decode():
    for src, pt, ro, model, w in instances(6, 15):
        cfg = DecoderConfig(w, **WIDE)
        assert nbest(src, pt, ro, model, cfg, n=1)[0][0] == decode(src, pt, ro, model, cfg).target


def test_features_reproduce_score_and_derivation_is_valid():
    for src, pt, ro, model, w in instances(8, 25):
        cfg = DecoderConfig(w, beam_size=20, distortion_limit=3)
        res = decode(src, pt, ro, model, cfg)
        assert abs(res.score - sum(w[f] * res.features[f] for f in FEATURES)) <= 1e-9
        covered = sorted(i for s in res.derivation for i in range(s.span[0], s.span[1] + 1))
        assert covered == list(range(len(src)))
        assert [t for s in res.derivation for t in s.target] == res.target
        summed = [sum(s.features[k] for s in res.derivation) for k in range(len(FEATURES))]
        assert summed == pytest.approx([res.features[f] for f in FEATURES], abs=1e-9)


def test_larger_beam_never_worse():
    for src, pt, ro, model, w in instances(10, 25):
        scores = [decode(src, pt, ro, model, DecoderConfig(w, beam_size=b, distortion_limit=None)).score
                  for b in (1, 2, 5, 50, 1000)]
        assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))


def test_trace_is_json_ready():
    src, pt, ro, model, w = instances(12, 1)[0]
    trace = decode(src, pt, ro, model, DecoderConfig(w)).trace()
    assert set(trace) == {"target", "score", "features", "derivation"}
    assert set(trace["derivation"][0]["features"]) == set(FEATURES)


class TestFutureCost:
    def test_single_word_is_its_option(self):
        pt = table({("kot", "cat"): (0.5, 0.5, 0.5, 0.5)})
        lm = tiny_lm()
        cost = future_cost_table(["kot"], pt, lm)
        lm_cf = math.log10(lm.prob(lm.word_id("cat"), ()))
        assert cost[0][0] == pytest.approx(-(4 * math.log(0.5) + lm_cf - 1))

    def test_dp_subadditive(self):
        for src, pt, ro, model, w in instances(14, 20):
            cost = future_cost_table(src, pt, model, DecoderConfig(w))
            n = len(src)
            for a in range(n):
                for b in range(a + 1, n):
                    for m in range(a, b):
                        assert cost[a][b] <= cost[a][m] + cost[m + 1][b] + 1e-12
