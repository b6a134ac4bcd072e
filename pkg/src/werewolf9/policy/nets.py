"""Minimal dense-network toolkit: MLPs with hand-rolled backprop, Adam, checkpoints.

Everything runs in 64-bit floats.  Hidden layers are rectified, outputs are
linear.  Gradients accumulate on the layer objects between zero_grads() calls
so the same network can be applied many times per step (shared parameters).
"""
from __future__ import annotations

import io
import json
import zipfile
from typing import Optional

import numpy as np


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Mlp:
    """Fully connected net; `sizes` runs input -> hidden... -> output."""

    def __init__(self, name: str, sizes: list[int], rng: Optional[np.random.Generator] = None):
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError(f"bad layer sizes {sizes}")
        self.name = name
        self.sizes = list(sizes)
        rng = rng or np.random.default_rng(0)
        self.W = [glorot_uniform(rng, sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]
        self.b = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]
        self.gW = [np.zeros_like(w) for w in self.W]
        self.gb = [np.zeros_like(b) for b in self.b]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def forward(self, x: np.ndarray):
        """x: (B, in) -> (y, cache).  Cache holds every layer input."""
        h = np.asarray(x, dtype=np.float64)
        inputs = [h]
        n = len(self.W)
        for i in range(n):
            z = h @ self.W[i] + self.b[i]
            h = np.maximum(z, 0.0) if i < n - 1 else z
            inputs.append(h)
        return h, inputs

    def backward(self, cache: list[np.ndarray], dy: np.ndarray) -> np.ndarray:
        """Accumulates parameter grads, returns gradient w.r.t. the input."""
        grad = np.asarray(dy, dtype=np.float64)
        n = len(self.W)
        for i in range(n - 1, -1, -1):
            if i < n - 1:  # undo the rectifier of this layer's output
                grad = grad * (cache[i + 1] > 0.0)
            self.gW[i] += cache[i].T @ grad
            self.gb[i] += grad.sum(axis=0)
            grad = grad @ self.W[i].T
        return grad

    def zero_grads(self) -> None:
        for g in self.gW:
            g.fill(0.0)
        for g in self.gb:
            g.fill(0.0)

    def params(self):
        for i in range(len(self.W)):
            yield f"{self.name}/W{i}", self.W[i], self.gW[i]
            yield f"{self.name}/b{i}", self.b[i], self.gb[i]

    def n_params(self) -> int:
        return sum(w.size for w in self.W) + sum(b.size for b in self.b)

    def copy(self) -> "Mlp":
        m = Mlp.__new__(Mlp)
        m.name = self.name
        m.sizes = list(self.sizes)
        m.W = [w.copy() for w in self.W]
        m.b = [b.copy() for b in self.b]
        m.gW = [np.zeros_like(w) for w in self.W]
        m.gb = [np.zeros_like(b) for b in self.b]
        return m


class Adam:
    """Adam with global-norm gradient clipping."""

    def __init__(self, lr: float = 2e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, max_grad_norm: float = 1.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, nets: list[Mlp]) -> float:
        """Applies one update from the accumulated grads; returns the raw grad norm."""
        triples = [t for net in nets for t in net.params()]
        sq = sum(float((g * g).sum()) for _, _, g in triples)
        norm = float(np.sqrt(sq))
        scale = 1.0
        if self.max_grad_norm and norm > self.max_grad_norm:
            scale = self.max_grad_norm / (norm + 1e-12)
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, w, g in triples:
            g = g * scale
            m = self._m.setdefault(name, np.zeros_like(w))
            v = self._v.setdefault(name, np.zeros_like(w))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            w -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
        return norm


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Log-probs with illegal entries at -inf; rows must have a legal entry."""
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=-1, keepdims=True)
    ez = np.exp(z - zmax)
    return z - zmax - np.log(ez.sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


# --------------------------------------------------------------- checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(path, nets: list[Mlp], meta: Optional[dict] = None) -> None:
    manifest = {
        "version": CHECKPOINT_VERSION,
        "nets": {net.name: net.sizes for net in nets},
        "meta": meta or {},
    }
    arrays = {}
    for net in nets:
        for i, (w, b) in enumerate(zip(net.W, net.b)):
            arrays[f"{net.name}/W{i}"] = w
            arrays[f"{net.name}/b{i}"] = b
    arrays["__manifest__"] = np.frombuffer(json.dumps(manifest).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[dict[str, Mlp], dict]:
    """Returns ({name: Mlp}, meta).  Validates the layer-size manifest."""
    with np.load(path) as data:
        manifest = json.loads(bytes(data["__manifest__"]).decode())
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest.get('version')}")
        nets = {}
        for name, sizes in manifest["nets"].items():
            net = Mlp(name, sizes)
            for i in range(len(sizes) - 1):
                w = data[f"{name}/W{i}"]
                b = data[f"{name}/b{i}"]
                if w.shape != (sizes[i], sizes[i + 1]):
                    raise ValueError(f"{name}/W{i} shape {w.shape} != manifest {sizes}")
                net.W[i] = w.astype(np.float64)
                net.b[i] = b.astype(np.float64)
            nets[name] = net
    return nets, manifest["meta"]
