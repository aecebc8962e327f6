"""Small fully connected networks with hand-written backpropagation.

Parameters live in one flat vector so optimisers, target-network blending
and checkpoints all work on plain arrays.
"""

from __future__ import annotations

import numpy as np


class MLP:
    """``tanh`` hidden layers and a linear output layer.

    Parameters
    ----------
    sizes : sequence of int
        Layer widths including input and output, e.g. ``(7, 128, 128, 6)``.
    rng : numpy.random.Generator
        Used for the uniform ``1/sqrt(fan_in)`` initialisation.
    """

    def __init__(self, sizes, rng=None, params=None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self._slices = []
        offset = 0
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = slice(offset, offset + n_in * n_out)
            offset += n_in * n_out
            b = slice(offset, offset + n_out)
            offset += n_out
            self._slices.append((w, b, n_in, n_out))
        self.n_params = offset
        if params is not None:
            params = np.array(params, dtype=float)
            if params.shape != (offset,):
                raise ValueError(f"expected {offset} parameters, got {params.shape}")
            self.params = params
        else:
            rng = np.random.default_rng() if rng is None else rng
            self.params = np.empty(offset)
            for w, b, n_in, n_out in self._slices:
                bound = 1.0 / np.sqrt(n_in)
                self.params[w] = rng.uniform(-bound, bound, n_in * n_out)
                self.params[b] = rng.uniform(-bound, bound, n_out)

    def copy(self) -> "MLP":
        return MLP(self.sizes, params=self.params.copy())

    def layers(self, params=None):
        p = self.params if params is None else params
        for w, b, n_in, n_out in self._slices:
            yield p[w].reshape(n_in, n_out), p[b]

    def forward(self, x, params=None):
        """Return the output and the activations needed by :meth:`backward`."""
        h = np.atleast_2d(np.asarray(x, dtype=float))
        acts = [h]
        layers = list(self.layers(params))
        for i, (W, b) in enumerate(layers):
            z = h @ W + b
            h = z if i == len(layers) - 1 else np.tanh(z)
            acts.append(h)
        return h, acts

    def __call__(self, x, params=None):
        return self.forward(x, params)[0]

    def backward(self, acts, grad_out, params=None):
        """Gradients of ``sum(grad_out * output)`` w.r.t. parameters and input."""
        g = np.asarray(grad_out, dtype=float)
        grads = np.empty(self.n_params)
        layers = list(self.layers(params))
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            w_sl, b_sl, _, _ = self._slices[i]
            grads[w_sl] = (acts[i].T @ g).ravel()
            grads[b_sl] = g.sum(axis=0)
            g = g @ W.T
            if i > 0:
                g = g * (1.0 - acts[i] ** 2)
        return grads, g


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params, grad):
        params -= self.lr * grad

    def state_dict(self) -> dict:
        return {}

    def load_state_dict(self, state):
        pass


class Adam:
    """Adam with bias correction, acting in place on a flat parameter vector."""

    def __init__(self, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grad):
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> dict:
        if self.m is None:
            return {"t": np.array(0)}
        return {"t": np.array(self.t), "m": self.m, "v": self.v}

    def load_state_dict(self, state):
        self.t = int(state["t"])
        self.m = np.array(state["m"]) if "m" in state else None
        self.v = np.array(state["v"]) if "v" in state else None


def make_optimizer(name: str, lr: float):
    if name == "sgd":
        return SGD(lr)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")
