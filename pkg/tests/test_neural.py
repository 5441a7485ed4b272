import math

import numpy as np
import pytest

from mtlab import neural
from mtlab.corpus import EOS_ID
from mtlab.neural import (
    ENDEC, SEARCH, Dims, NeuralError, TrainConfig, TrainingDiverged, backward, context_search,
    encode, forward_loss, init_params, load_params, save_params, train, translate_beam,
    translate_greedy,
)

import oracles

DIMS = Dims(10, 12, emb=4, hidden=5, att=3)


@pytest.fixture
def params():
    return init_params(DIMS, seed=3)


class TestInit:
    def test_deterministic_and_bounded(self):
        a, b, c = init_params(DIMS, 1), init_params(DIMS, 1), init_params(DIMS, 2)
        for name in a.arrays:
            assert np.array_equal(a[name], b[name])
            assert np.all(np.abs(a[name]) < neural.INIT_SCALE)
        assert not np.array_equal(a["out_W"], c["out_W"])

    def test_shapes(self, params):
        assert {k: v.shape for k, v in params.arrays.items()} == DIMS.shapes()

    def test_zero_dim(self):
        with pytest.raises(NeuralError):
            init_params(Dims(0, 5))


class TestEncoder:
    def test_single_position(self, params):
        assert encode(params, [4]).shape == (1, 2 * DIMS.hidden)

    def test_out_of_range_id(self, params):
        with pytest.raises(NeuralError):
            encode(params, [DIMS.src_vocab])
        with pytest.raises(NeuralError):
            encode(params, [])

    def test_zero_weights_give_constant_states(self, params):
        zero = neural.Seq2SeqParams(DIMS, params.zeros_like())
        states = encode(zero, [3, 4, 5, 6])
        assert np.all(states == states[0])

    def test_reversal_mirrors_backward_pass(self, params):
        # with tied directions the backward pass over x is the forward pass over reversed x
        tied = params.copy()
        for part in ("W", "U", "b"):
            tied.arrays[f"encb_{part}"] = tied[f"encf_{part}"].copy()
        src = [3, 7, 4, 9]
        H = DIMS.hidden
        fwd, rev = encode(tied, src), encode(tied, src[::-1])
        assert np.allclose(fwd[:, H:], rev[::-1, :H], atol=1e-14)


class TestAttention:
    def test_weights_normalised(self, params):
        states = encode(params, [3, 4, 5])
        rng = np.random.default_rng(0)
        for _ in range(10):
            _, alpha, _ = context_search(params, states, rng.normal(size=DIMS.hidden))
            assert alpha.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(alpha >= 0)

    def test_single_position(self, params):
        states = encode(params, [5])
        c, alpha, _ = context_search(params, states, np.ones(DIMS.hidden))
        assert alpha.tolist() == [1.0]
        assert np.array_equal(c, states[0])

    def test_zero_v_is_uniform(self, params):
        p = params.copy()
        p.arrays["att_v"][:] = 0
        _, alpha, _ = context_search(p, encode(p, [3, 4, 5, 6]), np.ones(DIMS.hidden))
        assert np.allclose(alpha, 0.25, atol=1e-15)

    def test_endec_context_is_constant(self, params):
        _, trace = forward_loss(params, [3, 4, 5], [6, 7, 8, 9], ENDEC)
        assert trace.weights == []
        assert all(np.array_equal(c, trace.contexts[0]) for c in trace.contexts)


class TestLoss:
    def test_near_log_vocab_at_init(self):
        p = init_params(Dims(20, 50, 8, 16, 8), seed=0)
        loss, _ = forward_loss(p, [3, 4, 5], [6, 7, 8])
        assert abs(loss - math.log(50)) <= 0.1 * math.log(50)

    def test_deterministic_and_nonnegative(self, params):
        a = forward_loss(params, [3, 4], [5, 6], SEARCH)[0]
        assert a == forward_loss(params, [3, 4], [5, 6], SEARCH)[0] and a >= 0

    def test_preconditions(self, params):
        with pytest.raises(NeuralError):
            forward_loss(params, [3, 4], [])
        with pytest.raises(NeuralError):
            forward_loss(params, [3] * 6, [4], max_len=5)
        with pytest.raises(NeuralError):
            forward_loss(params, [3], [4], "RNN")

    @pytest.mark.parametrize("variant", [ENDEC, SEARCH])
    def test_gradient_matches_finite_differences(self, params, variant):
        loss, grads = backward(params, [3, 5, 4], [6, 2, 7], variant)
        assert loss == pytest.approx(forward_loss(params, [3, 5, 4], [6, 2, 7], variant)[0], abs=1e-15)
        assert {k: g.shape for k, g in grads.items()} == DIMS.shapes()
        num = oracles.central_differences(params, [3, 5, 4], [6, 2, 7], variant)
        assert oracles.relative_error(grads, num) < 1e-4


class TestDecoding:
    def test_beam_one_equals_greedy(self, params):
        for src in ([3], [3, 4, 5], [9, 8, 7, 6]):
            for variant in (ENDEC, SEARCH):
                assert translate_beam(params, src, variant, 12, beam=1)[0] == \
                    translate_greedy(params, src, variant, 12)[0]

    def test_length_cap(self, params):
        p = params.copy()
        p.arrays["out_b"][EOS_ID] = -100.0
        assert len(translate_greedy(p, [3, 4], SEARCH, max_out_len=7)[0]) == 7
        assert len(translate_beam(p, [3, 4], SEARCH, max_out_len=7, beam=3)[0]) <= 7

    def test_greedy_tie_lowest_id(self, params):
        p = params.copy()
        p.arrays["out_W"][:] = 0
        p.arrays["out_b"][:] = 0
        p.arrays["out_b"][[5, 8]] = 1.0
        assert translate_greedy(p, [3], ENDEC, max_out_len=2)[0] == [5, 5]

    def test_bad_beam(self, params):
        with pytest.raises(NeuralError):
            translate_beam(params, [3], SEARCH, beam=0)


class TestCheckpoint:
    def test_round_trip(self, params, tmp_path):
        save_params(params, tmp_path / "m.pnmt")
        assert (tmp_path / "m.pnmt").read_bytes()[:5] == b"PNMT1"
        loaded = load_params(tmp_path / "m.pnmt")
        assert loaded.dims == DIMS
        assert all(np.array_equal(loaded[k], params[k]) for k in params.arrays)

    @pytest.mark.parametrize("damage, message", [
        (lambda b: b"XXXXX" + b[5:], "magic"),
        (lambda b: b[:-8], "truncated"),
        (lambda b: b + b"\0", "trailing"),
    ])
    def test_corrupt(self, params, tmp_path, damage, message):
        save_params(params, tmp_path / "m.pnmt")
        (tmp_path / "bad.pnmt").write_bytes(damage((tmp_path / "m.pnmt").read_bytes()))
        with pytest.raises(NeuralError, match=message):
            load_params(tmp_path / "bad.pnmt")


class TestTraining:
    pairs = oracles.copy_pairs(40, seed=5, symbols=6, max_len=4)

    def config(self, **kw):
        base = dict(variant=SEARCH, emb=8, hidden=8, att=8, max_updates=30, batch_size=4)
        base.update(kw)
        return TrainConfig(**base)

    def test_deterministic(self, tmp_path):
        a, la = train(self.pairs, self.config(), log_path=tmp_path / "log.jsonl")
        b, lb = train(self.pairs, self.config())
        assert la == lb
        assert all(np.array_equal(a[k], b[k]) for k in a.arrays)
        lines = (tmp_path / "log.jsonl").read_text().splitlines()
        assert len(lines) == 30 and '"norm"' in lines[0]

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_is_reported(self):
        with pytest.raises(TrainingDiverged):
            train(self.pairs, self.config(learning_rate=1e308, clip_norm=1e308))

    def test_bad_config(self):
        with pytest.raises(NeuralError):
            self.config(variant="LSTM")
        with pytest.raises(NeuralError):
            self.config(learning_rate=0)
        with pytest.raises(NeuralError):
            train([([], [3])], self.config())


@pytest.fixture(scope="module")
def model():
    pairs = oracles.copy_pairs(300, seed=1, symbols=6, max_len=5)
    return train(pairs, TrainConfig(max_updates=1500, seed=0))


@pytest.mark.slow
class TestTrainedCopyModel:
    def test_loss_falls(self, model):
        losses = model[1]
        assert np.mean(losses[-100:]) < np.mean(losses[:100])

    def test_copies_short_input(self, model):
        assert translate_greedy(model[0], [3, 4, 5], SEARCH, 10)[0] == [3, 4, 5]

    def test_search_context_varies(self, model):
        _, trace = translate_greedy(model[0], [3, 6, 8, 5], SEARCH, 10)
        assert not all(np.allclose(c, trace.contexts[0]) for c in trace.contexts)
