"""Dense tensors on a recorded tape, reverse-mode gradients, losses and Adam.

Every value is a 2-D float64 array (scalars are 1x1). Ops append to the tape
of their inputs in creation order, so the tape is always topologically
sorted and ``Tape.backward`` is a single reverse sweep.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

CHECKPOINT_VERSION = 1


class NonFiniteError(FloatingPointError):
    """Raised when an op produces NaN or Inf."""


class Tensor:
    __slots__ = ("value", "tape", "parents", "grad_fn", "name", "index")

    def __init__(self, value, tape, parents=(), grad_fn=None, name=None, index=-1):
        self.value = value
        self.tape = tape
        self.parents = parents
        self.grad_fn = grad_fn
        self.name = name
        self.index = index

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"


def _as2d(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError("tensors are 2-D")
    return arr


class Tape:
    """Append-only op record plus a registry of named parameters."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.params: dict[str, Tensor] = {}

    def _push(self, value, parents=(), grad_fn=None, name=None) -> Tensor:
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"non-finite value produced ({name or 'op'})")
        t = Tensor(value, self, parents, grad_fn, name, len(self.nodes))
        self.nodes.append(t)
        return t

    def param(self, name: str, value) -> Tensor:
        if name in self.params:
            raise KeyError(f"parameter {name!r} registered twice")
        t = self._push(_as2d(value), name=name)
        self.params[name] = t
        return t

    def const(self, value) -> Tensor:
        return self._push(_as2d(value))

    def backward(self, loss: Tensor) -> dict[str, np.ndarray]:
        if loss.shape != (1, 1):
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[loss.index] = np.ones((1, 1))
        for node in reversed(self.nodes[:loss.index + 1]):
            g = grads[node.index]
            if g is None or node.grad_fn is None:
                continue
            for parent, pg in zip(node.parents, node.grad_fn(g)):
                if pg is None:
                    continue
                if grads[parent.index] is None:
                    grads[parent.index] = pg
                else:
                    grads[parent.index] = grads[parent.index] + pg
        out = {}
        for name, t in self.params.items():
            g = grads[t.index]
            out[name] = np.zeros_like(t.value) if g is None else g
        return out


def _tape_of(*ts: Tensor) -> Tape:
    tape = ts[0].tape
    for t in ts[1:]:
        if t.tape is not tape:
            raise ValueError("tensors belong to different tapes")
    return tape


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


# ---------------------------------------------------------------- primitives

def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape[1] == b.shape[0], f"matmul shape mismatch {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _tape_of(a, b)._push(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g), "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, f"add shape mismatch {a.shape} + {b.shape}")
    return _tape_of(a, b)._push(a.value + b.value, (a, b), lambda g: (g, g), "add")


def scale(a: Tensor, c: float) -> Tensor:
    return a.tape._push(a.value * c, (a,), lambda g: (g * c,), "scale")


def affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """x @ W + b with b of shape (1, out)."""
    _check(x.shape[1] == W.shape[0], f"affine shape mismatch {x.shape} @ {W.shape}")
    _check(b.shape == (1, W.shape[1]), f"bias shape {b.shape} != (1, {W.shape[1]})")
    xv, Wv = x.value, W.value
    return _tape_of(x, W, b)._push(
        xv @ Wv + b.value, (x, W, b),
        lambda g: (g @ Wv.T, xv.T @ g, g.sum(axis=0, keepdims=True)), "affine")


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0
    return x.tape._push(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,), "relu")


def concat_cols(*ts: Tensor) -> Tensor:
    rows = ts[0].shape[0]
    _check(all(t.shape[0] == rows for t in ts), "concat_cols row mismatch")
    cuts = np.cumsum([0] + [t.shape[1] for t in ts])
    return _tape_of(*ts)._push(
        np.concatenate([t.value for t in ts], axis=1), ts,
        lambda g: tuple(g[:, cuts[i]:cuts[i + 1]] for i in range(len(ts))), "concat")


def softmax_rows(x: Tensor) -> Tensor:
    z = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def grad(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)
    return x.tape._push(p, (x,), grad, "softmax")


def log_softmax_rows(x: Tensor) -> Tensor:
    z = x.value - x.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse
    p = np.exp(out)
    return x.tape._push(out, (x,), lambda g: (g - p * g.sum(axis=1, keepdims=True),), "log_softmax")


def groups_to_matrix(groups: Sequence[Sequence[int]], n_src: int) -> sp.csr_matrix:
    rows, cols, data = [], [], []
    for v, grp in enumerate(groups):
        grp = list(grp)
        for u in grp:
            if not 0 <= u < n_src:
                raise IndexError(f"group index {u} out of range")
            rows.append(v)
            cols.append(u)
            data.append(1.0 / len(grp))
    return sp.csr_matrix((data, (rows, cols)), shape=(len(groups), n_src))


def grouped_mean(h: Tensor, groups) -> Tensor:
    """Row v is the mean of h over ``groups[v]``; an empty group gives a zero row.

    ``groups`` is either a list of index lists or a prebuilt sparse averaging
    matrix (see ``schedule.mean_matrix``).
    """
    M = groups if sp.issparse(groups) else groups_to_matrix(groups, h.shape[0])
    _check(M.shape[1] == h.shape[0], "grouped_mean index space mismatch")
    return h.tape._push(np.asarray(M @ h.value), (h,), lambda g: (np.asarray(M.T @ g),), "grouped_mean")


def take_rows(x: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    n = x.shape[0]

    def grad(g):
        scatter = sp.csr_matrix((np.ones(idx.shape[0]), (idx, np.arange(idx.shape[0]))),
                                shape=(n, idx.shape[0]))
        return (np.asarray(scatter @ g),)
    return x.tape._push(x.value[idx], (x,), grad, "take_rows")


def rowwise_dot(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, "rowwise_dot shape mismatch")
    av, bv = a.value, b.value
    return _tape_of(a, b)._push(
        (av * bv).sum(axis=1, keepdims=True), (a, b), lambda g: (g * bv, g * av), "rowwise_dot")


def pair_dot(z: Tensor, pairs) -> Tensor:
    """(m, 1) column of inner products z[u] . z[v] for each (u, v) pair."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    zu, zv = z.value[pairs[:, 0]], z.value[pairs[:, 1]]
    n, m = z.shape[0], pairs.shape[0]

    def grad(g):
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([np.arange(m), np.arange(m) + m])
        scatter = sp.csr_matrix((np.ones(2 * m), (rows, cols)), shape=(n, 2 * m))
        return (np.asarray(scatter @ np.concatenate([g * zv, g * zu])),)
    return z.tape._push((zu * zv).sum(axis=1, keepdims=True), (z,), grad, "pair_dot")


def weighted_sum(weights: Tensor, ts: Sequence[Tensor]) -> Tensor:
    """sum_j weights[:, j] * ts[j], row by row."""
    k = len(ts)
    _check(weights.shape[1] == k, "one weight column per tensor")
    shape = ts[0].shape
    _check(all(t.shape == shape for t in ts) and weights.shape[0] == shape[0], "weighted_sum shape mismatch")
    w = weights.value
    vals = [t.value for t in ts]
    out = sum(w[:, j:j + 1] * vals[j] for j in range(k))

    def grad(g):
        gw = np.stack([(g * vals[j]).sum(axis=1) for j in range(k)], axis=1)
        return (gw,) + tuple(g * w[:, j:j + 1] for j in range(k))
    return _tape_of(weights, *ts)._push(out, (weights, *ts), grad, "weighted_sum")


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return x.tape._push(x.value.sum().reshape(1, 1), (x,), lambda g: (np.full(shape, g[0, 0]),), "sum")


def mean_all(x: Tensor) -> Tensor:
    return scale(sum_all(x), 1.0 / x.value.size)


# -------------------------------------------------------------------- losses

def cross_entropy(logits: Tensor, labels, rows=None) -> Tensor:
    """Mean softmax cross-entropy over ``rows`` (all rows by default)."""
    labels = np.asarray(labels, dtype=np.int64)
    C = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise ValueError(f"label out of range [0, {C})")
    x = logits if rows is None else take_rows(logits, rows)
    _check(x.shape[0] == labels.shape[0], "one label per row")
    m = labels.shape[0]
    z = x.value - x.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    loss = float((lse - z[np.arange(m), labels]).mean())
    p = np.exp(z - lse[:, None])
    p[np.arange(m), labels] -= 1.0
    p /= m
    return x.tape._push(np.array([[loss]]), (x,), lambda g: (g[0, 0] * p,), "cross_entropy")


def bce_with_logits(logits: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy on an (m, 1) logit column."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    _check(logits.shape == y.shape, "one label per logit")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("binary labels must be 0 or 1")
    s = logits.value
    # log(1 + exp(-|s|)) keeps both branches stable
    loss = float((np.maximum(s, 0) - s * y + np.log1p(np.exp(-np.abs(s)))).mean())
    sig = 0.5 * (1.0 + np.tanh(0.5 * s))
    gl = (sig - y) / y.shape[0]
    return logits.tape._push(np.array([[loss]]), (logits,), lambda g: (g[0, 0] * gl,), "bce")


def soft_cross_entropy(probs: Tensor, target: np.ndarray) -> Tensor:
    """Mean over rows of -sum_j target_j log probs_j (target is a constant)."""
    target = np.asarray(target, dtype=np.float64)
    _check(probs.shape == target.shape, "soft_cross_entropy shape mismatch")
    p = probs.value
    m = p.shape[0]
    with np.errstate(divide="ignore"):
        logp = np.where(target > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
    if np.any((target > 0) & (p <= 0)):
        raise NonFiniteError("zero probability under a positive target")
    loss = float(-(target * logp).sum() / m)
    gp = np.where(target > 0, -target / np.where(p > 0, p, 1.0), 0.0) / m
    return probs.tape._push(np.array([[loss]]), (probs,), lambda g: (g[0, 0] * gp,), "soft_ce")


def per_row_cross_entropy(logits: np.ndarray, labels) -> np.ndarray:
    """Plain-array per-row softmax cross-entropy (no tape)."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return lse - z[np.arange(len(labels)), labels]


# ------------------------------------------------------------ params & adam

Params = dict[str, np.ndarray]


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class AdamState:
    lr: float = 0.01
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: Params, grads: Mapping[str, np.ndarray], state: AdamState,
              names: Sequence[str] | None = None) -> Params:
    """In-place Adam update; weight decay is L2 folded into the gradient."""
    state.step += 1
    t = state.step
    for name in (names if names is not None else grads.keys()):
        p = params[name]
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        if state.weight_decay:
            g = g + state.weight_decay * p
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        if state.lr == 0:
            continue
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        params[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def copy_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}


def save_checkpoint(path: str | Path, params: Params) -> None:
    """Structured-text dump: shape plus row-major values per named tensor."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "params": {k: {"shape": list(v.shape), "values": v.ravel().tolist()}
                   for k, v in sorted(params.items())},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path) -> Params:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    return {k: np.asarray(e["values"], dtype=np.float64).reshape(e["shape"])
            for k, e in doc["params"].items()}
