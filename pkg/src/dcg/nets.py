"""Small dense tanh networks with hand-written backprop, plus Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ShapeMismatch


class ParamNet:
    """Feed-forward net: tanh hidden layers and a linear output layer.

    Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
    shape ``(n, fan_in)`` maps to ``X @ W + b``. A net with input width 0 is
    a learned constant (its single layer reduces to the bias).
    """

    def __init__(self, layers):
        self.layers = []
        for w, b in layers:
            w, b = np.asarray(w, dtype=float), np.asarray(b, dtype=float)
            if w.size == 0 and w.ndim != 2:
                w = w.reshape(0, b.shape[0])
            self.layers.append((w, b))
        if not self.layers:
            raise ShapeMismatch("a net needs at least one layer")
        for (w, b), nxt in zip(self.layers, self.layers[1:] + [None]):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeMismatch(f"layer shapes do not match: W{w.shape}, b{b.shape}")
            if nxt is not None and nxt[0].shape[0] != w.shape[1]:
                raise ShapeMismatch("consecutive layer widths do not chain")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite weights")

    @classmethod
    def initialize(cls, in_width, hidden, out_width, rng) -> ParamNet:
        """Glorot-uniform weights, zero biases."""
        widths = [in_width, *hidden, out_width]
        layers = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)))
        return cls(layers)

    @property
    def in_width(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def out_width(self) -> int:
        return self.layers[-1][0].shape[1]

    @property
    def widths(self) -> list[int]:
        return [self.in_width] + [w.shape[1] for w, _ in self.layers]

    def copy(self) -> ParamNet:
        return ParamNet([(w.copy(), b.copy()) for w, b in self.layers])

    def forward(self, x, return_cache=False):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.ndim != 2 or h.shape[1] != self.in_width:
            raise ShapeMismatch(f"expected input width {self.in_width}, got {x.shape}")
        cache = [h]
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            cache.append(h)
        out = h[0] if single else h
        return (out, cache) if return_cache else out

    def backward(self, x, upstream, cache=None):
        """Parameter and input gradients of ``sum(upstream * forward(x))``.

        Returns ``(grads, dx)`` with ``grads`` a list of ``(dW, db)`` aligned
        with :attr:`layers`.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        g = np.asarray(upstream, dtype=float)
        if single:
            g = g[None, :]
        if cache is None:
            _, cache = self.forward(x[None, :] if single else x, return_cache=True)
        if g.shape != cache[-1].shape:
            raise ShapeMismatch(f"upstream gradient {g.shape} does not match output {cache[-1].shape}")
        grads = [None] * len(self.layers)
        last = len(self.layers) - 1
        for i in range(last, -1, -1):
            w, _ = self.layers[i]
            if i < last:
                g = g * (1.0 - cache[i + 1] ** 2)
            grads[i] = (cache[i].T @ g, g.sum(axis=0))
            g = g @ w.T
        return grads, (g[0] if single else g)

    def to_dict(self) -> dict:
        return {"layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in self.layers]}

    @classmethod
    def from_dict(cls, d) -> ParamNet:
        layers = []
        for layer in d["layers"]:
            layers.append((layer["w"], layer["b"]))
        return cls(layers)

    def __repr__(self):
        return f"ParamNet(widths={self.widths})"


def forward(net: ParamNet, x):
    return net.forward(x)


def backward(net: ParamNet, x, upstream):
    return net.backward(x, upstream)


@dataclass
class AdamState:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net: ParamNet, **hyper) -> AdamState:
        zeros = [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.layers]
        return cls(m=zeros, v=[(a.copy(), c.copy()) for a, c in zeros], **hyper)


def opt_step(net: ParamNet, grads, state: AdamState):
    """One Adam update, descending along ``grads``. Updates both in place."""
    if len(grads) != len(net.layers) or len(state.m) != len(net.layers):
        raise ShapeMismatch("gradients, optimizer state and net disagree on depth")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    scale = state.lr * np.sqrt(1.0 - b2**t) / (1.0 - b1**t)
    eps_hat = state.eps * np.sqrt(1.0 - b2**t)
    for i, ((w, b), (dw, db)) in enumerate(zip(net.layers, grads)):
        if dw.shape != w.shape or db.shape != b.shape:
            raise ShapeMismatch(f"gradient shape mismatch in layer {i}")
        for param, grad, m, v in ((w, dw, state.m[i][0], state.v[i][0]),
                                  (b, db, state.m[i][1], state.v[i][1])):
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * grad * grad
            param -= scale * m / (np.sqrt(v) + eps_hat)
    return net, state
