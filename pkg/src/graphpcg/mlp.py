"""Fully connected ReLU networks with hand-written backpropagation, and Adam."""
from __future__ import annotations

import numpy as np


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class MLP:
    """``sizes[0] -> sizes[1] -> ... -> sizes[-1]``, ReLU between layers,
    linear output.  Weights are stored ``(in, out)`` so ``y = x @ W + b``."""

    def __init__(self, sizes, rng: np.random.Generator | None = None, out_gain: float = 1.0,
                 dtype=np.float32):
        self.sizes = tuple(int(s) for s in sizes)
        self.params: list[np.ndarray] = []
        if rng is None:
            return
        last = len(self.sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            gain = out_gain if i == last else np.sqrt(2.0)
            self.params.append(orthogonal(rng, (fan_in, fan_out), gain).astype(dtype))
            self.params.append(np.zeros(fan_out, dtype=dtype))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def copy(self, dtype=None) -> "MLP":
        out = MLP(self.sizes)
        out.params = [p.astype(dtype or p.dtype, copy=True) for p in self.params]
        return out

    def forward(self, x: np.ndarray):
        """Return ``(output, cache)``; ``cache`` feeds :meth:`backward`."""
        acts = [x]
        h = x
        for i in range(self.n_layers):
            w, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ w + b
            if i < self.n_layers - 1:
                h = np.maximum(h, 0)
            acts.append(h)
        return h, acts

    def predict(self, x: np.ndarray) -> np.ndarray:
        h = x
        for i in range(self.n_layers):
            h = h @ self.params[2 * i] + self.params[2 * i + 1]
            if i < self.n_layers - 1:
                h = np.maximum(h, 0)
        return h

    def backward(self, acts, dout: np.ndarray) -> list[np.ndarray]:
        grads: list[np.ndarray] = [None] * len(self.params)
        d = dout
        for i in reversed(range(self.n_layers)):
            w = self.params[2 * i]
            grads[2 * i] = acts[i].T @ d
            grads[2 * i + 1] = d.sum(axis=0)
            if i > 0:
                d = (d @ w.T) * (acts[i] > 0)
        return grads


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-5):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads)))
    if max_norm and norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for g in grads:
            g *= scale
    return norm
