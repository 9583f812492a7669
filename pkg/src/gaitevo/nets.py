"""Small fully-connected networks with hand-written backpropagation.

Everything is float64 numpy with explicit gradient code so that analytic
gradients can be validated against central finite differences, parameter
updates stay bit-reproducible, and worker gradients can be averaged
exactly.  Hidden activations are tanh, outputs linear.
"""

from __future__ import annotations

import hashlib

import numpy as np


class Mlp:
    """Feed-forward net: len(sizes)-2 tanh hidden layers, linear output."""

    def __init__(self, sizes: tuple[int, ...], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, fan_out))

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (output, cache); x is (batch, in) and is kept in the cache."""
        cache = [x]
        h = x
        for i in range(self.num_layers - 1):
            h = np.tanh(h @ self.weights[i] + self.biases[i])
            cache.append(h)
        y = h @ self.weights[-1] + self.biases[-1]
        return y, cache

    def backward(self, cache: list[np.ndarray], dy: np.ndarray
                 ) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients for an upstream dL/dy; returns (param grads, dL/dx).

        Param grads are [dW0, db0, dW1, db1, ...] in layer order.
        """
        grads: list[np.ndarray] = [None] * (2 * self.num_layers)
        delta = dy
        for i in range(self.num_layers - 1, -1, -1):
            h_in = cache[i]
            grads[2 * i] = h_in.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
            if i > 0:
                delta = delta * (1.0 - cache[i] * cache[i])  # through tanh
        return grads, delta

    # -- parameter plumbing --------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_parameters(self, params: list[np.ndarray]) -> None:
        if len(params) != 2 * self.num_layers:
            raise ValueError("parameter count mismatch")
        for i in range(self.num_layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError("parameter shape mismatch")
            self.weights[i] = w
            self.biases[i] = b

    def copy_from(self, other: "Mlp") -> None:
        self.set_parameters([p.copy() for p in other.parameters()])


def flatten(arrays: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays])


def unflatten(vec: np.ndarray, template: list[np.ndarray]) -> list[np.ndarray]:
    out = []
    at = 0
    for t in template:
        n = t.size
        out.append(vec[at:at + n].reshape(t.shape))
        at += n
    if at != vec.size:
        raise ValueError("flat vector length mismatch")
    return out


def checksum(arrays: list[np.ndarray]) -> str:
    """Order-sensitive digest of the exact parameter bytes."""
    digest = hashlib.sha256()
    for a in arrays:
        digest.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return digest.hexdigest()


class Adam:
    """Adaptive-moment gradient descent over a list of parameter arrays."""

    def __init__(self, template: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in template]
        self.v = [np.zeros_like(p) for p in template]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        """One descent step; returns fresh parameter arrays."""
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / b1t
            v_hat = self.v[i] / b2t
            out.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out
