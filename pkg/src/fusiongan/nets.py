"""LSTM sequence generator and TextCNN-style critic in plain numpy.

Both networks expose batched forward passes with hand-derived backward passes;
the gradients are checked against central finite differences in the tests.
Parameters live in :class:`ParamSet` containers (ordered name -> array maps) so
clipping, Adam and checkpointing can treat them uniformly.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from scipy.special import expit

from .corpus import START

LOG_FLOOR = 1e-12
# sampling only; likelihoods and gradients are always float64
SAMPLING_DTYPE = np.float32
CKPT_MAGIC = "#fusiongan-ckpt v1"


class NumericError(FloatingPointError):
    """Raised when parameters or losses stop being finite."""


class ParamSet:
    """Ordered collection of named parameter arrays."""

    def __init__(self, arrays: dict[str, np.ndarray]):
        self.arrays = {k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()}

    def __getitem__(self, key: str) -> np.ndarray:
        return self.arrays[key]

    def __setitem__(self, key: str, value: np.ndarray) -> None:
        self.arrays[key] = value

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def keys(self):
        return self.arrays.keys()

    def items(self):
        return self.arrays.items()

    def _new(self, arrays: dict[str, np.ndarray]):
        other = copy.copy(self)
        other.arrays = arrays
        return other

    def map(self, fn: Callable[[np.ndarray], np.ndarray]):
        return self._new({k: fn(v) for k, v in self.arrays.items()})

    def combine(self, other: ParamSet, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        return self._new({k: fn(v, other.arrays[k]) for k, v in self.arrays.items()})

    def copy(self):
        return self.map(np.copy)

    def zeros_like(self):
        return self.map(np.zeros_like)

    def __add__(self, other: ParamSet):
        return self.combine(other, np.add)

    def __sub__(self, other: ParamSet):
        return self.combine(other, np.subtract)

    def scale(self, factor: float):
        return self.map(lambda a: a * factor)

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.arrays.values()])

    def from_flat(self, vector: np.ndarray):
        out, offset = {}, 0
        for k, v in self.arrays.items():
            out[k] = np.asarray(vector[offset:offset + v.size], dtype=np.float64).reshape(v.shape)
            offset += v.size
        return self._new(out)

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.arrays.values())

    def is_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays.values())

    def check_finite(self, what: str = "parameters") -> None:
        for k, v in self.arrays.items():
            if not np.isfinite(v).all():
                raise NumericError(f"non-finite values in {what} '{k}'")

    def allclose(self, other: ParamSet, **kw) -> bool:
        return all(np.allclose(v, other.arrays[k], **kw) for k, v in self.arrays.items())


class GeneratorParams(ParamSet):
    """``embedding`` (V,E), ``W`` (E+H, 4H) with gate blocks [input, forget, output, cell],
    ``b`` (4H), ``W_out`` (H,V), ``b_out`` (V)."""

    @property
    def vocab_size(self) -> int:
        return self["embedding"].shape[0]

    @property
    def embed_dim(self) -> int:
        return self["embedding"].shape[1]

    @property
    def hidden_size(self) -> int:
        return self["W_out"].shape[0]


class CriticParams(ParamSet):
    """``embedding`` (V,E); per width w: ``conv{w}.W`` (w,E,F), ``conv{w}.b`` (F);
    ``head.W`` (F*len(widths),), ``head.b`` scalar."""

    def __init__(self, arrays, widths, clip_bound: float | None = 0.01):
        super().__init__(arrays)
        self.widths = tuple(int(w) for w in widths)
        self.clip_bound = clip_bound

    @property
    def vocab_size(self) -> int:
        return self["embedding"].shape[0]

    @property
    def n_filters(self) -> int:
        return self[f"conv{self.widths[0]}.b"].shape[0]


@dataclass
class GenState:
    hidden: np.ndarray
    cell: np.ndarray


def init_generator(vocab_size: int, embed_dim: int = 32, hidden_size: int = 64,
                   rng: np.random.Generator | None = None, scale: float = 0.05) -> GeneratorParams:
    rng = np.random.default_rng() if rng is None else rng
    V, E, H = vocab_size, embed_dim, hidden_size
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0  # forget gate
    return GeneratorParams({
        "embedding": rng.uniform(-scale, scale, (V, E)),
        "W": rng.uniform(-scale, scale, (E + H, 4 * H)),
        "b": b,
        "W_out": rng.uniform(-scale, scale, (H, V)),
        "b_out": np.zeros(V),
    })


def init_critic(vocab_size: int, embed_dim: int = 32, widths=(1, 2, 3, 5), n_filters: int = 32,
                rng: np.random.Generator | None = None, clip_bound: float | None = 0.01,
                scale: float = 0.05) -> CriticParams:
    rng = np.random.default_rng() if rng is None else rng
    arrays = {"embedding": rng.uniform(-scale, scale, (vocab_size, embed_dim))}
    for w in widths:
        arrays[f"conv{w}.W"] = rng.uniform(-scale, scale, (w, embed_dim, n_filters))
        arrays[f"conv{w}.b"] = np.zeros(n_filters)
    arrays["head.W"] = rng.uniform(-scale, scale, n_filters * len(widths))
    arrays["head.b"] = np.zeros(())
    return CriticParams(arrays, widths, clip_bound)


# -- generator ----------------------------------------------------------------

def _masked_log_softmax(logits: np.ndarray) -> np.ndarray:
    # START is never emitted: its logit is excluded from the normaliser
    body = logits[..., 1:]
    top = body.max(axis=-1, keepdims=True)
    logp = np.empty_like(logits)
    logp[..., 1:] = body - (top + np.log(np.exp(body - top).sum(axis=-1, keepdims=True)))
    logp[..., 0] = -np.inf
    return logp


def _lstm_cell(Wh: np.ndarray, b: np.ndarray, x_proj: np.ndarray, h: np.ndarray, c: np.ndarray):
    H = h.shape[-1]
    z = x_proj + h @ Wh + b
    i = expit(z[..., :H])
    f = expit(z[..., H:2 * H])
    o = expit(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return i, f, o, g, c_new, tc, o * tc


def initial_state(params: GeneratorParams, batch: int | None = None) -> GenState:
    shape = (params.hidden_size,) if batch is None else (batch, params.hidden_size)
    return GenState(np.zeros(shape), np.zeros(shape))


def generator_step(params: GeneratorParams, state: GenState, token) -> tuple[np.ndarray, GenState]:
    """Consume ``token`` (scalar or batch) and return the next-token distribution and state."""
    params.check_finite("generator parameters")
    token = np.asarray(token)
    if np.any((token < 0) | (token >= params.vocab_size)):
        raise ValueError(f"token id out of range [0, {params.vocab_size})")
    E = params.embed_dim
    x_proj = params["embedding"][token] @ params["W"][:E]
    *_, c, _, h = _lstm_cell(params["W"][E:], params["b"], x_proj, state.hidden, state.cell)
    logp = _masked_log_softmax(h @ params["W_out"] + params["b_out"])
    return np.exp(logp), GenState(h, c)


def _sampling_tables(params: GeneratorParams):
    """Input-projection table and weights in the (reduced) sampling precision."""
    params.check_finite("generator parameters")
    E = params.embed_dim
    x_table = params["embedding"] @ params["W"][:E] + params["b"]
    cast = lambda a: np.ascontiguousarray(a, dtype=SAMPLING_DTYPE)  # noqa: E731
    return cast(x_table), cast(params["W"][E:]), SAMPLING_DTYPE(0.0), cast(params["W_out"]), cast(params["b_out"])


def _draw_from_logits(rng: np.random.Generator, logits: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw per row over the non-START entries of ``logits``."""
    body = logits[:, 1:].astype(np.float32, copy=True)
    body -= body.max(axis=1, keepdims=True)
    cdf = np.cumsum(np.exp(body, out=body), axis=1)
    u = rng.random(len(cdf), dtype=np.float32) * cdf[:, -1]
    tok = (cdf <= u[:, None]).sum(axis=1)
    return 1 + np.minimum(tok, body.shape[1] - 1)


def sample_sequences(params: GeneratorParams, n: int, T: int,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``n`` sequences of length ``T``; returns tokens and per-step log-probs, both (n, T)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    x_table, Wh, b, W_out, b_out = _sampling_tables(params)
    out = np.zeros((n, T), dtype=np.int64)
    logps = np.zeros((n, T))
    h = np.zeros((n, params.hidden_size), dtype=SAMPLING_DTYPE)
    c = np.zeros_like(h)
    prev = np.full(n, START, dtype=np.int64)
    rows = np.arange(n)
    for t in range(T):
        *_, c, _, h = _lstm_cell(Wh, b, x_table[prev], h, c)
        logits = h @ W_out + b_out
        tok = _draw_from_logits(rng, logits)
        logps[:, t] = _masked_log_softmax(logits)[rows, tok]
        out[:, t] = prev = tok
    return out, logps


def complete_prefixes(params: GeneratorParams, seqs: np.ndarray, n_rollouts: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Sampled completions of every proper prefix of every sequence.

    Returns an array of shape (T-1, n_rollouts, N, T): entry [t-1, r] holds the
    first ``t`` tokens of each sequence followed by an independent completion.
    """
    seqs = np.atleast_2d(seqs)
    N, T = seqs.shape
    H = params.hidden_size
    if T < 2:
        return np.zeros((0, n_rollouts, N, T), dtype=np.int64)
    _, cache = _generator_unroll(params, seqs, with_logits=False)
    # rows ordered by prefix length, so at sampling step k the rows still
    # running (prefix length < T - k) form a leading slice
    R = n_rollouts
    lengths = np.repeat(np.arange(1, T), R * N)
    h = np.repeat(cache["h"][1:], R, axis=0).reshape(-1, H).astype(SAMPLING_DTYPE)
    c = np.repeat(cache["c"][1:], R, axis=0).reshape(-1, H).astype(SAMPLING_DTYPE)
    out = np.broadcast_to(seqs, (T - 1, R, N, T)).reshape(-1, T).copy()
    x_table, Wh, b, W_out, b_out = _sampling_tables(params)
    pos = lengths.copy()
    prev = None
    for k in range(T - 1):
        active = int(np.searchsorted(lengths, T - k, side="left"))
        if prev is not None:
            *_, c_a, _, h_a = _lstm_cell(Wh, b, x_table[prev[:active]], h[:active], c[:active])
            h, c = h_a, c_a
        else:
            h, c = h[:active], c[:active]
        tok = _draw_from_logits(rng, h @ W_out + b_out)
        out[np.arange(active), pos[:active]] = tok
        pos = pos[:active] + 1
        lengths = lengths[:active]
        prev = tok
    return out.reshape(T - 1, R, N, T)


def generator_sample(params: GeneratorParams, T: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    seqs, logps = sample_sequences(params, 1, T, rng)
    return seqs[0], logps[0]


def _generator_unroll(params: GeneratorParams, tokens: np.ndarray, with_logits: bool = True):
    """Teacher-forced pass over (N, T) tokens, keeping every intermediate for BPTT."""
    N, T = tokens.shape
    H, E = params.hidden_size, params.embed_dim
    inputs = np.concatenate([np.full((N, 1), START, dtype=np.int64), tokens[:, :-1]], axis=1)
    x_table = params["embedding"] @ params["W"][:E]
    Wh, b = params["W"][E:], params["b"]
    cache = {k: np.zeros((T, N, H)) for k in ("i", "f", "o", "g", "c", "tc", "h")}
    h = np.zeros((N, H))
    c = np.zeros((N, H))
    for t in range(T):
        i, f, o, g, c, tc, h = _lstm_cell(Wh, b, x_table[inputs[:, t]], h, c)
        for k, v in zip(("i", "f", "o", "g", "c", "tc", "h"), (i, f, o, g, c, tc, h)):
            cache[k][t] = v
    cache["inputs"] = inputs
    if not with_logits:
        return None, cache
    logits = cache["h"] @ params["W_out"] + params["b_out"]  # (T, N, V)
    return _masked_log_softmax(logits), cache


def _floored_token_logp(logp: np.ndarray, tokens: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    T, N, _ = logp.shape
    chosen = logp[np.arange(T)[:, None], np.arange(N)[None, :], tokens.T]  # (T, N)
    live = chosen >= np.log(LOG_FLOOR)
    return np.where(live, chosen, np.log(LOG_FLOOR)), live


def sequence_log_probs(params: GeneratorParams, tokens: np.ndarray) -> np.ndarray:
    """Per-step floored log p(s_t | s_<t) as an (N, T) array."""
    tokens = np.atleast_2d(tokens)
    logp, _ = _generator_unroll(params, tokens)
    chosen, _ = _floored_token_logp(logp, tokens)
    return chosen.T


def sequence_nll(params: GeneratorParams, seq: np.ndarray) -> float:
    """-sum_t log p(s_t | s_<t) for a single sequence."""
    value = -float(sequence_log_probs(params, np.asarray(seq)[None, :]).sum())
    if not np.isfinite(value):
        raise NumericError("sequence NLL is not finite")
    return value


def mean_nll(params: GeneratorParams, tokens: np.ndarray) -> float:
    return -float(sequence_log_probs(params, tokens).sum(axis=1).mean())


def grad_weighted_logprob(params: GeneratorParams, tokens: np.ndarray,
                          weights: np.ndarray) -> GeneratorParams:
    """Gradient of (1/N) * sum_n sum_t weights[n, t] * log p(s_nt | s_n,<t)."""
    tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
    weights = np.broadcast_to(np.asarray(weights, dtype=np.float64), tokens.shape)
    N, T = tokens.shape
    H, E, V = params.hidden_size, params.embed_dim, params.vocab_size
    logp, cache = _generator_unroll(params, tokens)
    _, live = _floored_token_logp(logp, tokens)

    coef = (weights.T * live) / N  # (T, N)
    dlogits = -np.exp(logp) * coef[..., None]
    dlogits[np.arange(T)[:, None], np.arange(N)[None, :], tokens.T] += coef
    dlogits[..., 0] = 0.0

    grads = {
        "W_out": np.einsum("tnh,tnv->hv", cache["h"], dlogits),
        "b_out": dlogits.sum(axis=(0, 1)),
    }
    dh_out = dlogits @ params["W_out"].T  # (T, N, H)

    W = params["W"]
    Wx, Wh = W[:E], W[E:]
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * H)
    demb = np.zeros_like(params["embedding"])
    emb = params["embedding"]
    dh_next = np.zeros((N, H))
    dc_next = np.zeros((N, H))
    for t in reversed(range(T)):
        i, f, o, g, tc = (cache[k][t] for k in ("i", "f", "o", "g", "tc"))
        c_prev = cache["c"][t - 1] if t > 0 else np.zeros((N, H))
        h_prev = cache["h"][t - 1] if t > 0 else np.zeros((N, H))
        dh = dh_out[t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc ** 2) + dc_next
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_prev * f * (1.0 - f),
            do * o * (1.0 - o),
            dc * i * (1.0 - g ** 2),
        ], axis=1)
        x = emb[cache["inputs"][:, t]]
        dWx += x.T @ dz
        dWh += h_prev.T @ dz
        db += dz.sum(axis=0)
        np.add.at(demb, cache["inputs"][:, t], dz @ Wx.T)
        dh_next = dz @ Wh.T
        dc_next = dc * f
    grads["embedding"] = demb
    grads["W"] = np.concatenate([dWx, dWh], axis=0)
    grads["b"] = db
    out = params._new({k: grads[k] for k in params.keys()})
    out.check_finite("generator gradient")
    return out


def grad_nll(params: GeneratorParams, tokens: np.ndarray) -> GeneratorParams:
    """Gradient of the mean per-sequence NLL over the batch."""
    return grad_weighted_logprob(params, tokens, np.ones(np.shape(np.atleast_2d(tokens)))).scale(-1.0)


# -- critic -------------------------------------------------------------------

def _critic_forward(params: CriticParams, tokens: np.ndarray):
    tokens = np.atleast_2d(tokens)
    T = tokens.shape[1]
    if T < max(params.widths):
        raise ValueError(f"sequence length {T} shorter than widest filter {max(params.widths)}")
    emb = params["embedding"]
    feats, argmaxes, pooled_all = [], [], []
    for w in params.widths:
        W = params[f"conv{w}.W"]
        L = T - w + 1
        # offset-k filter slice applied to every vocabulary entry: (V, F) lookup tables
        conv = params[f"conv{w}.b"] + sum((emb @ W[k])[tokens[:, k:k + L]] for k in range(w))  # (N, L, F)
        idx = conv.argmax(axis=1)  # (N, F)
        pooled = np.take_along_axis(conv, idx[:, None, :], axis=1)[:, 0, :]
        argmaxes.append(idx)
        pooled_all.append(pooled)
        feats.append(np.maximum(pooled, 0.0))
    features = np.concatenate(feats, axis=1)
    scores = features @ params["head.W"] + params["head.b"]
    return scores, (features, argmaxes, pooled_all)


def critic_scores(params: CriticParams, tokens: np.ndarray) -> np.ndarray:
    """Scores for a batch of sequences, shape (N,)."""
    scores, _ = _critic_forward(params, tokens)
    if not np.isfinite(scores).all():
        raise NumericError("critic produced non-finite scores")
    return scores


def critic_score(params: CriticParams, seq: np.ndarray) -> float:
    return float(critic_scores(params, np.asarray(seq)[None, :])[0])


def critic_weighted_grad(params: CriticParams, tokens: np.ndarray, coef: np.ndarray) -> CriticParams:
    """Gradient of sum_i coef[i] * score(tokens[i])."""
    tokens = np.atleast_2d(tokens)
    coef = np.asarray(coef, dtype=np.float64)
    N = tokens.shape[0]
    features, argmaxes, pooled_all = _critic_forward(params, tokens)[1]
    grads = {"head.W": features.T @ coef, "head.b": np.asarray(coef.sum())}
    dfeat = coef[:, None] * params["head.W"][None, :]
    emb = params["embedding"]
    demb = np.zeros_like(emb)
    F = params.n_filters
    rows = np.arange(N)[:, None]
    for j, w in enumerate(params.widths):
        W = params[f"conv{w}.W"]
        # only the argmax position of each (sequence, filter) receives gradient
        dpool = dfeat[:, j * F:(j + 1) * F] * (pooled_all[j] > 0)  # (N, F)
        idx = argmaxes[j]
        grads[f"conv{w}.b"] = dpool.sum(axis=0)
        dW = np.zeros_like(W)
        for k in range(w):
            toks = tokens[rows, idx + k]  # (N, F)
            dW[k] = np.einsum("nfe,nf->ef", emb[toks], dpool)
            np.add.at(demb, toks, dpool[..., None] * W[k].T[None])
        grads[f"conv{w}.W"] = dW
    grads["embedding"] = demb
    out = params._new({k: grads[k] for k in params.keys()})
    out.check_finite("critic gradient")
    return out


def grad_critic(params: CriticParams, tokens: np.ndarray, signs: np.ndarray) -> CriticParams:
    """Gradient of (1/N) * sum_i signs[i] * score(tokens[i])."""
    tokens = np.atleast_2d(tokens)
    return critic_weighted_grad(params, tokens, np.asarray(signs, dtype=np.float64) / tokens.shape[0])


def clip_parameters(params: CriticParams) -> CriticParams:
    c = params.clip_bound
    if c is None:
        return params.copy()
    if c <= 0:
        raise ValueError("clip_bound must be positive")
    return params.map(lambda a: np.clip(a, -c, c))


# -- optimisation -------------------------------------------------------------

@dataclass
class AdamState:
    m: ParamSet
    v: ParamSet
    t: int = 0

    @classmethod
    def zeros(cls, params: ParamSet) -> AdamState:
        return cls(params.zeros_like(), params.zeros_like(), 0)


def adam_step(params: ParamSet, grad: ParamSet, direction: str, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update; ``direction`` is ``"ascend"`` or ``"descend"``."""
    if direction not in ("ascend", "descend"):
        raise ValueError(f"direction must be 'ascend' or 'descend', got {direction!r}")
    sign = 1.0 if direction == "ascend" else -1.0
    t = state.t + 1
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = sign * grad[k]
        m = beta1 * state.m[k] + (1 - beta1) * g
        v = beta2 * state.v[k] + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        new_p[k] = p + lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[k], new_v[k] = m, v
    out = params._new(new_p)
    out.check_finite()
    return out, AdamState(state.m._new(new_m), state.v._new(new_v), t)


# -- checkpoint file ----------------------------------------------------------

def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named arrays as little-endian float32 behind a text manifest.

    Layout: magic line, ``meta <json>``, ``manifest <n>``, n lines of
    ``name shape offset`` (shape as ``AxBxC``, ``-`` for scalars, offset in bytes
    from the start of the data block), ``data <nbytes>``, then the raw block.
    """
    lines = [CKPT_MAGIC, "meta " + json.dumps(meta or {}, sort_keys=True), f"manifest {len(arrays)}"]
    blobs, offset = [], 0
    for name, arr in arrays.items():
        if any(ch.isspace() for ch in name):
            raise ValueError(f"array name may not contain whitespace: {name!r}")
        arr = np.asarray(arr)
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        shape = "x".join(str(d) for d in arr.shape) or "-"
        lines.append(f"{name} {shape} {offset}")
        blobs.append(blob)
        offset += len(blob)
    lines.append(f"data {offset}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8") + b"".join(blobs))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    pos = 0

    def next_line() -> str:
        nonlocal pos
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode("utf-8")
        pos = end + 1
        return line

    if next_line() != CKPT_MAGIC:
        raise ValueError(f"{path}: not a fusiongan checkpoint")
    meta_line = next_line()
    if not meta_line.startswith("meta "):
        raise ValueError(f"{path}: missing meta line")
    meta = json.loads(meta_line[5:])
    kind, count = next_line().split()
    if kind != "manifest":
        raise ValueError(f"{path}: missing manifest")
    entries = []
    for _ in range(int(count)):
        name, shape, offset = next_line().split()
        dims = () if shape == "-" else tuple(int(d) for d in shape.split("x"))
        entries.append((name, dims, int(offset)))
    kind, nbytes = next_line().split()
    data = raw[pos:]
    if kind != "data" or len(data) != int(nbytes):
        raise ValueError(f"{path}: truncated data block")
    arrays = {}
    for name, dims, offset in entries:
        size = int(np.prod(dims, dtype=np.int64))
        arrays[name] = np.frombuffer(data, dtype="<f4", count=size, offset=offset).reshape(dims).astype(np.float64)
    return arrays, meta


def params_to_arrays(prefix: str, params: ParamSet) -> dict[str, np.ndarray]:
    return {f"{prefix}/{k}": v for k, v in params.items()}


def arrays_to_params(prefix: str, arrays: dict[str, np.ndarray], template: ParamSet):
    return template._new({k: arrays[f"{prefix}/{k}"] for k in template.keys()})
