"""GRU encoder-decoder translators in plain numpy.

Two variants share one parameter set:

* ``ENDEC`` feeds the decoder the same context vector at every step, the
  last bidirectional encoder state.
* ``SEARCH`` recomputes the context at every step as an attention-weighted
  sum of all encoder states, with energies ``v . tanh(W s + U h_j)``.

Gradients are derived by hand (see :func:`backward`); everything runs in
float64 so finite differences can check them.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import BOS_ID, EOS_ID

ENDEC = "ENDEC"
SEARCH = "SEARCH"
VARIANTS = (ENDEC, SEARCH)

MAGIC = b"PNMT1"
INIT_SCALE = 0.08

# checkpoint order; shapes are given by Dims.shapes()
PARAM_ORDER = (
    "src_emb", "tgt_emb",
    "encf_W", "encf_U", "encf_b",
    "encb_W", "encb_U", "encb_b",
    "init_W", "init_b",
    "dec_W", "dec_U", "dec_b",
    "att_W", "att_U", "att_v",
    "out_W", "out_b",
)


class NeuralError(ValueError):
    pass


@dataclass(frozen=True)
class Dims:
    src_vocab: int
    tgt_vocab: int
    emb: int = 16
    hidden: int = 32
    att: int = 32

    def shapes(self) -> dict[str, tuple[int, ...]]:
        E, H, A = self.emb, self.hidden, self.att
        return {
            "src_emb": (self.src_vocab, E), "tgt_emb": (self.tgt_vocab, E),
            "encf_W": (3 * H, E), "encf_U": (3 * H, H), "encf_b": (3 * H,),
            "encb_W": (3 * H, E), "encb_U": (3 * H, H), "encb_b": (3 * H,),
            "init_W": (H, 2 * H), "init_b": (H,),
            "dec_W": (3 * H, E + 2 * H), "dec_U": (3 * H, H), "dec_b": (3 * H,),
            "att_W": (A, H), "att_U": (A, 2 * H), "att_v": (A,),
            "out_W": (self.tgt_vocab, 3 * H + E), "out_b": (self.tgt_vocab,),
        }


@dataclass
class Seq2SeqParams:
    dims: Dims
    arrays: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def copy(self) -> "Seq2SeqParams":
        return Seq2SeqParams(self.dims, {k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}


@dataclass
class AttentionTrace:
    weights: list[np.ndarray] = field(default_factory=list)    # alpha_i over source positions
    contexts: list[np.ndarray] = field(default_factory=list)   # c_i


@dataclass
class TrainConfig:
    variant: str = SEARCH
    emb: int = 16
    hidden: int = 32
    att: int = 32
    max_updates: int = 3000
    batch_size: int = 16
    learning_rate: float = 0.5
    clip_norm: float = 5.0
    seed: int = 0
    max_len: int = 50
    log_every: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise NeuralError(f"variant must be one of {VARIANTS}")
        for name in ("emb", "hidden", "att", "max_updates", "batch_size", "max_len"):
            if getattr(self, name) <= 0:
                raise NeuralError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise NeuralError("learning_rate and clip_norm must be positive")


def init_params(dims: Dims, seed: int = 0) -> Seq2SeqParams:
    """Uniform(-0.08, 0.08) initialization, deterministic per seed."""
    if min(dims.src_vocab, dims.tgt_vocab, dims.emb, dims.hidden, dims.att) <= 0:
        raise NeuralError(f"all dimensions must be positive: {dims}")
    rng = np.random.default_rng(seed)
    arrays = {name: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
              for name, shape in dims.shapes().items()}
    return Seq2SeqParams(dims, arrays)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


# -- GRU cell ---------------------------------------------------------------

def _gru_step(W, U, b, x, h):
    H = h.shape[0]
    ax = W @ x + b
    au = U[:2 * H] @ h
    z = _sigmoid(ax[:H] + au[:H])
    r = _sigmoid(ax[H:2 * H] + au[H:])
    hh = np.tanh(ax[2 * H:] + U[2 * H:] @ (r * h))
    h_new = (1.0 - z) * h + z * hh
    return h_new, (x, h, z, r, hh)


def _gru_step_back(W, U, cache, dh, gW, gU, gb):
    x, h, z, r, hh = cache
    H = h.shape[0]
    dh_prev = dh * (1.0 - z)
    dz = dh * (hh - h)
    dah = dh * z * (1.0 - hh * hh)
    rh = r * h
    gW[2 * H:] += np.outer(dah, x)
    gU[2 * H:] += np.outer(dah, rh)
    gb[2 * H:] += dah
    drh = U[2 * H:].T @ dah
    dr = drh * h
    dh_prev += drh * r
    daz = dz * z * (1.0 - z)
    dar = dr * r * (1.0 - r)
    da_zr = np.concatenate([daz, dar])
    gW[:2 * H] += np.outer(da_zr, x)
    gU[:2 * H] += np.outer(da_zr, h)
    gb[:2 * H] += da_zr
    dh_prev += U[:2 * H].T @ da_zr
    dx = W[2 * H:].T @ dah + W[:2 * H].T @ da_zr
    return dx, dh_prev


# -- encoder / attention ----------------------------------------------------

def _check_ids(ids: Sequence[int], vocab: int, side: str) -> None:
    for i in ids:
        if not 0 <= i < vocab:
            raise NeuralError(f"{side} id {i} outside vocabulary of size {vocab}")


def _encode(params: Seq2SeqParams, source: Sequence[int]):
    if len(source) == 0:
        raise NeuralError("source sentence is empty")
    _check_ids(source, params.dims.src_vocab, "source")
    H = params.dims.hidden
    xs = params["src_emb"][list(source)]
    T = len(source)
    hf = np.zeros((T, H))
    hb = np.zeros((T, H))
    fcache, bcache = [None] * T, [None] * T
    h = np.zeros(H)
    for t in range(T):
        h, fcache[t] = _gru_step(params["encf_W"], params["encf_U"], params["encf_b"], xs[t], h)
        hf[t] = h
    h = np.zeros(H)
    for t in range(T - 1, -1, -1):
        h, bcache[t] = _gru_step(params["encb_W"], params["encb_U"], params["encb_b"], xs[t], h)
        hb[t] = h
    return np.concatenate([hf, hb], axis=1), (fcache, bcache)


def encode(params: Seq2SeqParams, source: Sequence[int]) -> np.ndarray:
    """Encoder states, one row per source position: [forward; backward]."""
    return _encode(params, source)[0]


def context_endec(states: np.ndarray) -> np.ndarray:
    return states[-1]


def context_search(params: Seq2SeqParams, states: np.ndarray, s_prev: np.ndarray,
                   projected: np.ndarray | None = None):
    """Attention context for one decoder step; returns ``(c, alpha, tanh_act)``."""
    if projected is None:
        projected = states @ params["att_U"].T
    act = np.tanh(params["att_W"] @ s_prev + projected)
    alpha = _softmax(act @ params["att_v"])
    return alpha @ states, alpha, act


def _initial_state(params: Seq2SeqParams, states: np.ndarray):
    H = params.dims.hidden
    q = np.concatenate([states[-1, :H], states[0, H:]])
    return np.tanh(params["init_W"] @ q + params["init_b"]), q


# -- loss and gradients -----------------------------------------------------

def _forward(params: Seq2SeqParams, source, target, variant: str):
    if variant not in VARIANTS:
        raise NeuralError(f"variant must be one of {VARIANTS}")
    if len(target) == 0:
        raise NeuralError("target sentence is empty")
    _check_ids(target, params.dims.tgt_vocab, "target")
    states, enc_cache = _encode(params, source)
    projected = states @ params["att_U"].T
    s, q = _initial_state(params, states)
    s0 = s
    inputs = [BOS_ID, *target]
    outputs = [*target, EOS_ID]
    steps = []
    trace = AttentionTrace()
    loss = 0.0
    for y_prev, y in zip(inputs, outputs):
        if variant == SEARCH:
            c, alpha, act = context_search(params, states, s, projected)
        else:
            c, alpha, act = context_endec(states), None, None
        emb = params["tgt_emb"][y_prev]
        x = np.concatenate([emb, c])
        s_prev = s
        s, gcache = _gru_step(params["dec_W"], params["dec_U"], params["dec_b"], x, s_prev)
        o = np.concatenate([s, c, emb])
        p = _softmax(params["out_W"] @ o + params["out_b"])
        loss -= math.log(p[y])
        steps.append((y_prev, y, s_prev, c, alpha, act, gcache, o, p))
        if alpha is not None:
            trace.weights.append(alpha)
        trace.contexts.append(c)
    loss /= len(outputs)
    return loss, trace, (states, enc_cache, projected, q, s0, steps)


def forward_loss(params: Seq2SeqParams, source: Sequence[int], target: Sequence[int],
                 variant: str = SEARCH, max_len: int | None = None):
    """Teacher-forced mean per-token cross-entropy (end marker included)."""
    if max_len is not None and (len(source) > max_len or len(target) > max_len):
        raise NeuralError(f"sentence pair longer than {max_len} tokens")
    loss, trace, _ = _forward(params, source, target, variant)
    return loss, trace


def backward(params: Seq2SeqParams, source: Sequence[int], target: Sequence[int],
             variant: str = SEARCH):
    """Loss and exact gradients of :func:`forward_loss` w.r.t. every array."""
    loss, _, (states, (fcache, bcache), projected, q, s0, steps) = \
        _forward(params, source, target, variant)
    g = params.zeros_like()
    H, E = params.dims.hidden, params.dims.emb
    T = states.shape[0]
    n = len(steps)
    d_states = np.zeros_like(states)
    d_projected = np.zeros_like(projected)
    ds = np.zeros(H)

    for y_prev, y, s_prev, c, alpha, act, gcache, o, p in reversed(steps):
        dlogits = p.copy()
        dlogits[y] -= 1.0
        dlogits /= n
        g["out_W"] += np.outer(dlogits, o)
        g["out_b"] += dlogits
        do = params["out_W"].T @ dlogits
        ds = ds + do[:H]
        dc = do[H:3 * H]
        demb = do[3 * H:]
        dx, ds = _gru_step_back(params["dec_W"], params["dec_U"], gcache, ds,
                                g["dec_W"], g["dec_U"], g["dec_b"])
        demb = demb + dx[:E]
        dc = dc + dx[E:]
        g["tgt_emb"][y_prev] += demb
        if variant == SEARCH:
            dalpha = states @ dc
            d_states += np.outer(alpha, dc)
            de = alpha * (dalpha - alpha @ dalpha)
            g["att_v"] += act.T @ de
            dpre = np.outer(de, params["att_v"]) * (1.0 - act * act)
            dpre_sum = dpre.sum(axis=0)
            g["att_W"] += np.outer(dpre_sum, s_prev)
            ds = ds + params["att_W"].T @ dpre_sum
            d_projected += dpre
        else:
            d_states[-1] += dc

    # s0 = tanh(init_W q + init_b), q = [forward state at T; backward state at 1]
    da = ds * (1.0 - s0 * s0)
    g["init_W"] += np.outer(da, q)
    g["init_b"] += da
    dq = params["init_W"].T @ da
    d_states[-1, :H] += dq[:H]
    d_states[0, H:] += dq[H:]
    # projected = states @ att_U.T
    g["att_U"] += d_projected.T @ states
    d_states += d_projected @ params["att_U"]

    dxs = np.zeros((T, E))
    dh = np.zeros(H)
    for t in range(T - 1, -1, -1):
        dx, dh = _gru_step_back(params["encf_W"], params["encf_U"], fcache[t],
                                dh + d_states[t, :H], g["encf_W"], g["encf_U"], g["encf_b"])
        dxs[t] += dx
    dh = np.zeros(H)
    for t in range(T):
        dx, dh = _gru_step_back(params["encb_W"], params["encb_U"], bcache[t],
                                dh + d_states[t, H:], g["encb_W"], g["encb_U"], g["encb_b"])
        dxs[t] += dx
    np.add.at(g["src_emb"], list(source), dxs)
    return loss, g


def numerical_gradient(params: Seq2SeqParams, source, target, variant: str,
                       eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of the loss w.r.t. every parameter entry."""
    work = params.copy()
    grads = {}
    for name, arr in work.arrays.items():
        out = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = out.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            lp = _forward(work, source, target, variant)[0]
            flat[k] = orig - eps
            lm = _forward(work, source, target, variant)[0]
            flat[k] = orig
            gflat[k] = (lp - lm) / (2 * eps)
        grads[name] = out
    return grads


def max_relative_error(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray],
                       floor: float = 1e-8) -> float:
    worst = 0.0
    for name, a in analytic.items():
        b = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


# -- training ---------------------------------------------------------------

class TrainingDiverged(RuntimeError):
    pass


def _global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def train(pairs: Sequence[tuple[Sequence[int], Sequence[int]]], config: TrainConfig,
          dims: Dims | None = None, log_path=None):
    """Minibatch SGD with global-norm clipping.

    ``pairs`` hold unwrapped id sequences. Returns ``(params, losses)`` with
    one mean batch loss per update. Pairs longer than ``config.max_len`` on
    either side are skipped.
    """
    data = [(list(s), list(t)) for s, t in pairs
            if 0 < len(s) <= config.max_len and 0 < len(t) <= config.max_len]
    if not data:
        raise NeuralError("no usable training pairs")
    if dims is None:
        dims = Dims(max(max(s) for s, _ in data) + 1,
                    max(max(max(t) for _, t in data), EOS_ID) + 1,
                    config.emb, config.hidden, config.att)
    params = init_params(dims, config.seed)
    rng = np.random.default_rng(config.seed + 1)
    order = rng.permutation(len(data))
    cursor = 0
    losses = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for update in range(config.max_updates):
            batch = []
            for _ in range(config.batch_size):
                if cursor == len(order):
                    order = rng.permutation(len(data))
                    cursor = 0
                batch.append(data[order[cursor]])
                cursor += 1
            total = params.zeros_like()
            batch_loss = 0.0
            for src, tgt in batch:
                loss, g = backward(params, src, tgt, config.variant)
                batch_loss += loss
                for k in total:
                    total[k] += g[k]
            batch_loss /= len(batch)
            if not math.isfinite(batch_loss):
                raise TrainingDiverged(f"loss became {batch_loss} at update {update}")
            for k in total:
                total[k] /= len(batch)
            norm = _global_norm(total)
            if not math.isfinite(norm):
                raise TrainingDiverged(f"gradient norm became {norm} at update {update}")
            scale = config.learning_rate * min(1.0, config.clip_norm / norm) if norm > 0 else 0.0
            for k, arr in params.arrays.items():
                arr -= scale * total[k]
            losses.append(batch_loss)
            if log_fh is not None:
                log_fh.write(json.dumps({"update": update, "loss": batch_loss, "norm": norm}) + "\n")
    finally:
        if log_fh is not None:
            log_fh.close()
    return params, losses


# -- inference --------------------------------------------------------------

class _Decoder:
    """Incremental decoding state shared by greedy and beam search."""

    def __init__(self, params: Seq2SeqParams, source, variant: str):
        if variant not in VARIANTS:
            raise NeuralError(f"variant must be one of {VARIANTS}")
        self.params = params
        self.variant = variant
        self.states = encode(params, source)
        self.projected = self.states @ params["att_U"].T
        self.s0 = _initial_state(params, self.states)[0]

    def step(self, s, y_prev):
        p = self.params
        if self.variant == SEARCH:
            c, alpha, _ = context_search(p, self.states, s, self.projected)
        else:
            c, alpha = context_endec(self.states), None
        emb = p["tgt_emb"][y_prev]
        s_new, _ = _gru_step(p["dec_W"], p["dec_U"], p["dec_b"], np.concatenate([emb, c]), s)
        logits = p["out_W"] @ np.concatenate([s_new, c, emb]) + p["out_b"]
        logp = logits - logits.max()
        logp -= math.log(np.exp(logp).sum())
        return s_new, logp, c, alpha


def translate_greedy(params: Seq2SeqParams, source: Sequence[int], variant: str = SEARCH,
                     max_out_len: int = 100):
    """Argmax decoding (ties go to the lowest id); returns ``(ids, trace)``."""
    dec = _Decoder(params, source, variant)
    s, y = dec.s0, BOS_ID
    out: list[int] = []
    trace = AttentionTrace()
    while len(out) < max_out_len:
        s, logp, c, alpha = dec.step(s, y)
        trace.contexts.append(c)
        if alpha is not None:
            trace.weights.append(alpha)
        y = int(np.argmax(logp))
        if y == EOS_ID:
            break
        out.append(y)
    return out, trace


def translate_beam(params: Seq2SeqParams, source: Sequence[int], variant: str = SEARCH,
                   max_out_len: int = 100, beam: int = 5):
    """Beam search over total log-probability; returns ``(ids, trace)`` of the best."""
    if beam < 1:
        raise NeuralError("beam must be >= 1")
    dec = _Decoder(params, source, variant)
    # (score, tokens, state, trace)
    live = [(0.0, (), dec.s0, AttentionTrace())]
    finished = []
    while live and len(finished) < beam:
        cands = []
        for score, toks, s, tr in live:
            y_prev = toks[-1] if toks else BOS_ID
            s_new, logp, c, alpha = dec.step(s, y_prev)
            ntr = AttentionTrace(tr.weights + ([alpha] if alpha is not None else []),
                                 tr.contexts + [c])
            for y in np.argsort(-logp, kind="stable")[:beam]:
                cands.append((score + float(logp[y]), toks, int(y), s_new, ntr))
        cands.sort(key=lambda x: (-x[0], x[1] + (x[2],)))
        live = []
        for score, toks, y, s_new, ntr in cands:
            if len(live) + len(finished) >= beam:
                break
            if y == EOS_ID:
                finished.append((score, toks, ntr))
            elif len(toks) + 1 >= max_out_len:
                finished.append((score, toks + (y,), ntr))
            else:
                live.append((score, toks + (y,), s_new, ntr))
    pool = finished or [(sc, t, tr) for sc, t, _, tr in live]
    best = min(pool, key=lambda x: (-x[0], x[1]))
    return list(best[1]), best[2]


# -- checkpoints ------------------------------------------------------------

def save_params(params: Seq2SeqParams, path) -> None:
    """Checkpoint layout (little-endian): b"PNMT1", u8 version, five u32 dims
    (src_vocab, tgt_vocab, emb, hidden, att), then every array of
    ``PARAM_ORDER`` as flat f64 in C order."""
    d = params.dims
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<B5I", 1, d.src_vocab, d.tgt_vocab, d.emb, d.hidden, d.att))
        for name in PARAM_ORDER:
            fh.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())


def load_params(path) -> Seq2SeqParams:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(MAGIC)] != MAGIC:
        raise NeuralError(f"{path}: not a checkpoint (bad magic)")
    header = struct.calcsize("<B5I")
    if len(data) < len(MAGIC) + header:
        raise NeuralError(f"{path}: truncated header")
    version, *dims = struct.unpack_from("<B5I", data, len(MAGIC))
    if version != 1:
        raise NeuralError(f"{path}: unsupported version {version}")
    dims = Dims(*dims)
    pos = len(MAGIC) + header
    arrays = {}
    for name in PARAM_ORDER:
        shape = dims.shapes()[name]
        size = int(np.prod(shape)) * 8
        if pos + size > len(data):
            raise NeuralError(f"{path}: truncated at {name}")
        arrays[name] = np.frombuffer(data[pos:pos + size], dtype="<f8").reshape(shape).copy()
        pos += size
    if pos != len(data):
        raise NeuralError(f"{path}: {len(data) - pos} trailing bytes")
    return Seq2SeqParams(dims, arrays)
