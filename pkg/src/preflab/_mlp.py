"""Tiny tanh multilayer perceptron with hand-written backprop.

Used by both the reward networks and the policy heads. Kept deliberately
dependency-free so training runs are bit-reproducible from a seed and the
analytic gradients can be checked against finite differences.
"""

from __future__ import annotations

import numpy as np


class MLP:
    """Fully connected net: linear layers with tanh on all but the last."""

    def __init__(self, sizes: list[int], rng: np.random.Generator):
        self.sizes = list(sizes)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray):
        """Returns (output, cache); cache feeds backward()."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients of sum(output * grad_out) w.r.t. params and input."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        g = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = cache[i].T @ g
            grads_b[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (1.0 - cache[i] ** 2)  # cache[i] is tanh output
        return grads_w, grads_b, g

    # -- parameter plumbing ------------------------------------------------

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.param_arrays()])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for p in self.param_arrays():
            p[...] = flat[i : i + p.size].reshape(p.shape)
            i += p.size
        if i != flat.size:
            raise ValueError("flat parameter vector has wrong length")

    def copy_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.param_arrays()]

    def load_params(self, params: list[np.ndarray]) -> None:
        for dst, src in zip(self.param_arrays(), params):
            dst[...] = src


class MomentumSGD:
    def __init__(self, mlp: MLP, lr: float, momentum: float = 0.9):
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p in mlp.param_arrays()]

    def step(self, mlp: MLP, grads_w, grads_b) -> None:
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend([gw, gb])
        for p, v, g in zip(mlp.param_arrays(), self.velocity, grads):
            v *= self.momentum
            v -= self.lr * g
            p += v


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1**self.t
        corr2 = 1.0 - b2**self.t
        for p, m, v, g in zip(params, self.m, self.v, grads):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)
