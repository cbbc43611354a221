"""Small fully-connected network with manual backprop, plus an Adam optimizer.

Hidden layers use the rectifier; the output layer is linear. Everything is
plain float64 numpy so training runs are bit-reproducible given a seed.
"""

from __future__ import annotations

import numpy as np


class Mlp:
    def __init__(self, layer_sizes: list[int], weights: list[np.ndarray], biases: list[np.ndarray]):
        self.layer_sizes = list(layer_sizes)
        self.weights = weights  # weights[l]: (out, in)
        self.biases = biases  # biases[l]: (out,)

    @classmethod
    def init(cls, layer_sizes: list[int], rng: np.random.Generator) -> "Mlp":
        """He-style initialization, seeded."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            weights.append(rng.normal(0.0, scale, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(layer_sizes, weights, biases)

    def copy(self) -> "Mlp":
        return Mlp(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x: (batch, in) or (in,). Returns matching (batch, out) or (out,)."""
        single = x.ndim == 1
        h = x[None, :] if single else x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if l != last:
                h = np.maximum(h, 0.0)
        return h[0] if single else h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batched forward keeping post-activation values for backprop."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if l != last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return h, acts

    def backward(
        self, acts: list[np.ndarray], d_out: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Gradients of a scalar loss w.r.t. weights/biases given dL/d(output)."""
        d_w = [np.empty(0)] * len(self.weights)
        d_b = [np.empty(0)] * len(self.biases)
        delta = d_out
        for l in range(len(self.weights) - 1, -1, -1):
            d_w[l] = delta.T @ acts[l]
            d_b[l] = delta.sum(axis=0)
            if l > 0:
                delta = (delta @ self.weights[l]) * (acts[l] > 0.0)
        return d_w, d_b


class Adam:
    def __init__(self, mlp: Mlp, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in mlp.weights]
        self.v_w = [np.zeros_like(w) for w in mlp.weights]
        self.m_b = [np.zeros_like(b) for b in mlp.biases]
        self.v_b = [np.zeros_like(b) for b in mlp.biases]

    def step(self, mlp: Mlp, d_w: list[np.ndarray], d_b: list[np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for l in range(len(mlp.weights)):
            for param, grad, m, v in (
                (mlp.weights[l], d_w[l], self.m_w[l], self.v_w[l]),
                (mlp.biases[l], d_b[l], self.m_b[l], self.v_b[l]),
            ):
                m *= self.beta1
                m += (1 - self.beta1) * grad
                v *= self.beta2
                v += (1 - self.beta2) * grad * grad
                param -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
