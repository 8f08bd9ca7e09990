"""Small dense networks in float64 numpy with hand-written backprop.

Hidden layers use ReLU.  Output heads:

* ``linear``  -- raw affine output
* ``tanh``    -- ``low + (high - low) * (tanh(z) + 1) / 2``, elementwise bounds
* ``softmax`` -- probabilities; an optional boolean mask forces entries to 0
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HEADS = ("linear", "tanh", "softmax")


class NonFiniteError(FloatingPointError):
    pass


class StaleTapeError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


def masked_softmax(z: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    z = np.array(z, dtype=float)
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), z.shape)
        if not np.all(mask.any(axis=-1)):
            raise ValueError("softmax with every entry masked")
        z = np.where(mask, z, -np.inf)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class Tape:
    """Activations from one forward pass, valid until the net is updated."""
    inputs: list[np.ndarray]  # input to each layer
    pre: list[np.ndarray]  # pre-activations of each layer
    output: np.ndarray
    squeeze: bool
    version: int


def _layout(sizes: list[int]) -> list[tuple[int, int, int, int]]:
    """(weight start, weight end, bias end, fan_out) per layer in a flat vector."""
    spans, at = [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        spans.append((at, at + a * b, at + a * b + b, b))
        at += a * b + b
    return spans


def _views(flat: np.ndarray, sizes: list[int]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    ws, bs = [], []
    for (w0, w1, b1, fan_out), fan_in in zip(_layout(sizes), sizes[:-1]):
        ws.append(flat[w0:w1].reshape(fan_in, fan_out))
        bs.append(flat[w1:b1])
    return ws, bs


class Grads:
    """Parameter gradients in one flat vector with per-layer views, plus
    the gradient with respect to the network input."""

    def __init__(self, flat: np.ndarray, sizes: list[int], dx: np.ndarray | None = None):
        self.flat = flat
        self.sizes = sizes
        self.dW, self.db = _views(flat, sizes)
        self.dx = dx

    def __add__(self, other: "Grads") -> "Grads":
        return Grads(self.flat + other.flat, self.sizes)

    def scaled(self, c: float) -> "Grads":
        return Grads(c * self.flat, self.sizes, None if self.dx is None else c * self.dx)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat)))


class Mlp:
    def __init__(self, sizes, head: str = "linear", low=None, high=None,
                 rng: np.random.Generator | None = None, final_scale: float = 3e-3):
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = [int(s) for s in sizes]
        self.head = head
        out = self.sizes[-1]
        if head == "tanh":
            self.low = np.broadcast_to(np.asarray(0.0 if low is None else low, float), (out,)).copy()
            self.high = np.broadcast_to(np.asarray(1.0 if high is None else high, float), (out,)).copy()
        else:
            self.low = self.high = None
        self.version = 0
        rng = rng or np.random.default_rng(0)
        self.flat = np.zeros(_layout(self.sizes)[-1][2])
        self.weights, self.biases = _views(self.flat, self.sizes)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            last = i == len(self.weights) - 1
            bound = final_scale if last else 1.0 / np.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            if not last:
                b[...] = rng.uniform(-bound, bound, size=b.shape)

    # -- parameters ----------------------------------------------------
    def copy(self) -> "Mlp":
        new = object.__new__(Mlp)
        new.__dict__.update(self.__dict__)
        new.flat = self.flat.copy()
        new.weights, new.biases = _views(new.flat, new.sizes)
        new.version = 0
        return new

    def load_from(self, other: "Mlp") -> None:
        self.flat[...] = other.flat
        self.version += 1

    def zero(self) -> None:
        self.flat[...] = 0.0
        self.version += 1

    # -- forward / backward -------------------------------------------
    def _check_input(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        x2 = x[None, :] if squeeze else x
        if x2.ndim != 2 or x2.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input of width {self.sizes[0]}, got shape {x.shape}")
        return x2, squeeze

    def _head(self, z: np.ndarray, mask) -> np.ndarray:
        if self.head == "linear":
            return z
        if self.head == "tanh":
            return self.low + (self.high - self.low) * (np.tanh(z) + 1.0) / 2.0
        return masked_softmax(z, mask)

    def forward_tape(self, x, mask=None) -> tuple[np.ndarray, Tape]:
        h, squeeze = self._check_input(x)
        inputs, pre = [], []
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < n_layers - 1 else z
        out = self._head(h, mask)
        tape = Tape(inputs, pre, out, squeeze, self.version)
        return (out[0] if squeeze else out), tape

    def forward(self, x, mask=None) -> np.ndarray:
        return self.forward_tape(x, mask)[0]

    def logits(self, x) -> np.ndarray:
        """Pre-head output of the last layer."""
        _, tape = self.forward_tape(x)
        z = tape.pre[-1]
        return z[0] if tape.squeeze else z

    def backward(self, tape: Tape, upstream, wrt: str = "output") -> Grads:
        """Gradients of ``sum(upstream * y)`` for the taped forward pass.

        ``wrt="logits"`` treats ``upstream`` as the gradient with respect to
        the last affine output, bypassing the head.
        """
        if tape.version != self.version:
            raise StaleTapeError("tape was recorded before the last parameter update")
        g = np.asarray(upstream, dtype=float)
        if tape.squeeze and g.ndim == 1:
            g = g[None, :]
        if g.shape != tape.pre[-1].shape:
            raise ValueError(f"upstream shape {g.shape} != output shape {tape.pre[-1].shape}")
        if wrt == "output":
            if self.head == "tanh":
                t = np.tanh(tape.pre[-1])
                g = g * (self.high - self.low) / 2.0 * (1.0 - t * t)
            elif self.head == "softmax":
                p = tape.output
                g = p * (g - np.sum(g * p, axis=-1, keepdims=True))
        elif wrt != "logits":
            raise ValueError(f"wrt must be 'output' or 'logits', not {wrt!r}")
        grads = Grads(np.empty_like(self.flat), self.sizes)
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (tape.pre[i] > 0)
            np.matmul(tape.inputs[i].T, g, out=grads.dW[i])
            np.sum(g, axis=0, out=grads.db[i])
            g = g @ self.weights[i].T
        grads.dx = g[0] if tape.squeeze else g
        return grads

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "head": self.head,
            "low": None if self.low is None else self.low.tolist(),
            "high": None if self.high is None else self.high.tolist(),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        net = cls(d["sizes"], d["head"], d["low"], d["high"])
        for i, (w, b) in enumerate(zip(d["weights"], d["biases"])):
            w, b = np.asarray(w, float), np.asarray(b, float)
            if w.shape != net.weights[i].shape or b.shape != net.biases[i].shape:
                raise CheckpointError(f"layer {i} shape mismatch")
            net.weights[i][...] = w
            net.biases[i][...] = b
        return net


def _check_finite(grads: Grads) -> None:
    if not grads.is_finite():
        raise NonFiniteError("non-finite gradient; training halted")


def sgd_step(net: Mlp, grads: Grads, lr: float, ascent: bool = False) -> Mlp:
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    _check_finite(grads)
    sign = 1.0 if ascent else -1.0
    net.flat += sign * lr * grads.flat
    net.version += 1
    return net


class Adam:
    """Moment state for one network."""

    def __init__(self, net: Mlp, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros_like(net.flat)
        self.v = np.zeros_like(net.flat)
        self.t = 0

    def to_dict(self) -> dict:
        return {"t": self.t, "m": self.m.tolist(), "v": self.v.tolist()}

    def load_dict(self, d: dict) -> None:
        m, v = np.asarray(d["m"], float), np.asarray(d["v"], float)
        if m.shape != self.m.shape or v.shape != self.v.shape:
            raise CheckpointError("optimizer moments do not match the network")
        self.t, self.m, self.v = int(d["t"]), m, v


def adam_step(net: Mlp, grads: Grads, lr: float, moments: Adam, ascent: bool = False) -> Mlp:
    if not lr > 0:
        raise ValueError("learning rate must be positive")
    _check_finite(grads)
    moments.t += 1
    b1, b2 = moments.beta1, moments.beta2
    c1 = 1.0 - b1 ** moments.t
    c2 = 1.0 - b2 ** moments.t
    sign = 1.0 if ascent else -1.0
    g, m, v = grads.flat, moments.m, moments.v
    m *= b1
    m += (1 - b1) * g
    v *= b2
    v += (1 - b2) * g * g
    net.flat += sign * lr * (m / c1) / (np.sqrt(v / c2) + moments.eps)
    net.version += 1
    return net


class Optimizer:
    """Uniform front for ``sgd`` and ``adam`` updates of one network."""

    def __init__(self, net: Mlp, kind: str, lr: float):
        if kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {kind!r}")
        self.net, self.kind, self.lr = net, kind, lr
        self.moments = Adam(net) if kind == "adam" else None

    def step(self, grads: Grads, ascent: bool = False) -> None:
        if self.moments is None:
            sgd_step(self.net, grads, self.lr, ascent)
        else:
            adam_step(self.net, grads, self.lr, self.moments, ascent)


def soft_update(target: Mlp, source: Mlp, v: float) -> None:
    """target <- v * source + (1 - v) * target, parameter-wise."""
    target.flat[...] = v * source.flat + (1.0 - v) * target.flat
    target.version += 1


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(path: str | Path, nets: dict[str, Mlp], config_hash: str,
                    optimizers: dict[str, Optimizer] | None = None, extra: dict | None = None) -> Path:
    doc = {
        "format": "wpmec-checkpoint/1",
        "config_hash": config_hash,
        "nets": {k: n.to_dict() for k, n in sorted(nets.items())},
        "optimizers": {k: (o.moments.to_dict() if o.moments else None)
                       for k, o in sorted((optimizers or {}).items())},
        "extra": extra or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return path


def load_checkpoint(path: str | Path, config_hash: str | None = None) -> dict:
    """Parsed checkpoint with nets rebuilt; raises if ``config_hash`` differs."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "wpmec-checkpoint/1":
        raise CheckpointError(f"{path}: not a checkpoint file")
    if config_hash is not None and doc["config_hash"] != config_hash:
        raise CheckpointError(
            f"checkpoint config hash {doc['config_hash']} does not match config {config_hash}")
    doc["nets"] = {k: Mlp.from_dict(v) for k, v in doc["nets"].items()}
    return doc
