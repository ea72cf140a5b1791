"""Dense numeric kernel: two-layer MLPs with hand-derived gradients,
Xavier-uniform initialization, Adam, dropout, and stable losses.

Everything operates on plain numpy arrays so gradients stay verifiable
against finite differences in 64-bit mode; production runs may use
float32 parameters via the dtype argument.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream

HINP_MAGIC = b"HINP"


class NumericError(Exception):
    """Non-finite value encountered where finiteness is required."""


def _generator(rng):
    if isinstance(rng, RngStream):
        return rng.next_generator()
    return rng


def xavier_init(shape, rng, dtype=np.float64) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = shape[0], shape[1] if len(shape) > 1 else shape[0]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    g = _generator(rng)
    return g.uniform(-bound, bound, size=shape).astype(dtype)


@dataclass
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams(*(v.copy() for v in (self.w1, self.b1, self.w2, self.b2)))


def init_mlp(in_dim: int, hidden: int, out_dim: int, rng, dtype=np.float64) -> MlpParams:
    return MlpParams(
        w1=xavier_init((in_dim, hidden), rng, dtype),
        b1=np.zeros(hidden, dtype=dtype),
        w2=xavier_init((hidden, out_dim), rng, dtype),
        b2=np.zeros(out_dim, dtype=dtype),
    )


def mlp_forward(p: MlpParams, x: np.ndarray, dropout: float = 0.0, rng=None, train: bool = True):
    """ReLU two-layer forward pass; returns (output, cache for backward)."""
    if x.shape[1] != p.in_dim:
        raise ValueError(f"input dim {x.shape[1]} != {p.in_dim}")
    z1 = x @ p.w1 + p.b1
    a1 = np.maximum(z1, 0.0)
    mask = None
    if train and dropout > 0.0:
        g = _generator(rng)
        keep = 1.0 - dropout
        mask = (g.random(a1.shape) < keep).astype(a1.dtype) / keep
        a1 = a1 * mask
    out = a1 @ p.w2 + p.b2
    cache = {"x": x, "z1": z1, "a1": a1, "mask": mask, "p": p}
    return out, cache


def mlp_backward(cache, d_out: np.ndarray):
    """Gradients of the forward map; returns (param grads dict, input grad)."""
    p: MlpParams = cache["p"]
    a1, z1, x, mask = cache["a1"], cache["z1"], cache["x"], cache["mask"]
    if d_out.shape != (x.shape[0], p.out_dim):
        raise ValueError("upstream gradient shape mismatch")
    d_w2 = a1.T @ d_out
    d_b2 = d_out.sum(axis=0)
    d_a1 = d_out @ p.w2.T
    if mask is not None:
        d_a1 = d_a1 * mask
    d_z1 = d_a1 * (z1 > 0)
    d_w1 = x.T @ d_z1
    d_b1 = d_z1.sum(axis=0)
    d_x = d_z1 @ p.w1.T
    return {"w1": d_w1, "b1": d_b1, "w2": d_w2, "b2": d_b2}, d_x


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState):
    """Standard Adam with bias correction; updates params in place."""
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        if state.weight_decay:
            g = g + state.weight_decay * p
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        m_hat = state.m[name] / (1 - state.beta1**t)
        v_hat = state.v[name] / (1 - state.beta2**t)
        p -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)
    return params, state


# ---------------------------------------------------------------------------
# losses

def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def cross_entropy(logits: np.ndarray, classes: np.ndarray):
    """Mean cross-entropy over the batch; returns (loss, dlogits)."""
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    n, c = logits.shape
    classes = np.asarray(classes)
    if len(classes) and (classes.min() < 0 or classes.max() >= c):
        raise ValueError("class index out of range")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), classes]))
    probs = softmax(logits, axis=1)
    d = probs
    d[np.arange(n), classes] -= 1.0
    return loss, d / n


def bce_with_logits(logits: np.ndarray, targets: np.ndarray):
    """Logit-space binary cross-entropy, mean over all elements."""
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    t = np.asarray(targets, dtype=logits.dtype)
    # log(1 + exp(-|z|)) + max(z, 0) - z*t, stable for large |z|
    loss_mat = np.log1p(np.exp(-np.abs(logits))) + np.maximum(logits, 0) - logits * t
    loss = float(loss_mat.mean())
    e = np.exp(-np.abs(logits))
    sig = np.where(logits >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    d = (sig - t) / logits.size
    return loss, d


# ---------------------------------------------------------------------------
# checkpoint format

def write_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    """Binary checkpoint: magic, tensor count, per-tensor shape table, f32 payloads."""
    with open(path, "wb") as f:
        f.write(HINP_MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        names = sorted(tensors)
        for name in names:
            x = tensors[name]
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", x.ndim))
            for d in x.shape:
                f.write(struct.pack("<I", d))
        for name in names:
            f.write(np.ascontiguousarray(tensors[name], dtype="<f4").tobytes())


def read_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        if f.read(4) != HINP_MAGIC:
            raise NumericError(f"bad checkpoint magic in {path}")
        (count,) = struct.unpack("<I", f.read(4))
        shapes = []
        for _ in range(count):
            (nlen,) = struct.unpack("<H", f.read(2))
            name = f.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim)) if ndim else ()
            shapes.append((name, shape))
        out = {}
        for name, shape in shapes:
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(size * 4), dtype="<f4")
            out[name] = data.reshape(shape).astype(np.float64)
    return out
