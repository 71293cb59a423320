"""Small MLPs with hand-written backprop, Adam, and a finite-difference check.

Parameters live in one flat float64 vector; per-layer weight matrices and
bias vectors are views into it, so optimizer updates are in place. Only the
pieces this project needs: dense layers, leaky-relu/tanh/identity, batched
forward/backward, classic L2-in-gradient weight decay.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

LEAKY_SLOPE = 0.01
ACTIVATIONS = ("leaky_relu", "tanh", "identity")


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "leaky_relu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "identity":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def _act_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "leaky_relu":
        return np.where(z > 0, 1.0, LEAKY_SLOPE)
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {kind!r}")


class Mlp:
    """Fully connected network with a flat parameter vector.

    `sizes` gives the layer widths (input first); `activations` has one tag
    per weight layer. Initialization is uniform in +-sqrt(1/fan_in), seeded.
    """

    def __init__(self, sizes, activations, seed: int = 0, init: bool = True):
        sizes = list(int(s) for s in sizes)
        activations = list(activations)
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per weight layer")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.sizes = sizes
        self.activations = activations
        self.n_params = sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1))
        self.theta = np.zeros(self.n_params)
        self._views = []
        off = 0
        for i in range(len(sizes) - 1):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            w = self.theta[off:off + fan_in * fan_out].reshape(fan_out, fan_in)
            off += fan_in * fan_out
            b = self.theta[off:off + fan_out]
            off += fan_out
            self._views.append((w, b))
        if init:
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x11]))
            for w, b in self._views:
                bound = np.sqrt(1.0 / w.shape[1])
                w[:] = rng.uniform(-bound, bound, w.shape)
                b[:] = rng.uniform(-bound, bound, b.shape)
        self._cache = None

    @property
    def n_layers(self) -> int:
        return len(self._views)

    def layer(self, i: int):
        """(weights, bias) views for layer i; mutating them mutates theta."""
        return self._views[i]

    def get_params(self) -> np.ndarray:
        return self.theta.copy()

    def set_params(self, theta) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != self.theta.shape:
            raise ValueError("parameter vector has the wrong length")
        self.theta[:] = theta

    def forward(self, x) -> np.ndarray:
        """Batched forward pass; caches intermediates for backward()."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        a = x.reshape(1, -1) if squeeze else x
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input width {self.sizes[0]}, got {a.shape[1]}")
        inputs, zs, acts = [a], [], []
        for (w, b), kind in zip(self._views, self.activations):
            z = a @ w.T + b
            a = _act(z, kind)
            zs.append(z)
            acts.append(a)
            inputs.append(a)
        self._cache = (inputs, zs, acts)
        return a[0] if squeeze else a

    def backward(self, upstream) -> np.ndarray:
        """Gradient of sum(upstream * output) w.r.t. the flat parameters.

        Requires a prior forward(); the batch dimension is reduced in a fixed
        order so repeated calls are bit-identical.
        """
        if self._cache is None:
            raise RuntimeError("forward() must run before backward()")
        inputs, zs, acts = self._cache
        batch, out = acts[-1].shape
        g = np.asarray(upstream, dtype=np.float64)
        if g.ndim == 1:
            g = g.reshape(1, -1) if batch == 1 else g.reshape(-1, 1)
        if g.shape != (batch, out):
            raise ValueError(f"upstream shape {g.shape} does not match output "
                             f"({batch}, {out})")
        grads = np.zeros(self.n_params)
        off = self.n_params
        for i in range(self.n_layers - 1, -1, -1):
            w, b = self._views[i]
            gz = g * _act_grad(zs[i], acts[i], self.activations[i])
            off -= b.shape[0]
            grads[off:off + b.shape[0]] = gz.sum(axis=0)
            off -= w.size
            grads[off:off + w.size] = (gz.T @ inputs[i]).ravel()
            if i > 0:
                g = gz @ w
        return grads

    def to_dict(self) -> dict:
        layers = []
        for w, b in self._views:
            layers.append({"weights": [[float(v) for v in row] for row in w],
                           "bias": [float(v) for v in b]})
        return {"sizes": self.sizes, "activations": self.activations, "layers": layers}

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        net = cls(d["sizes"], d["activations"], init=False)
        for (w, b), layer in zip(net._views, d["layers"]):
            w[:] = np.asarray(layer["weights"], dtype=np.float64)
            b[:] = np.asarray(layer["bias"], dtype=np.float64)
        return net

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True, separators=(",", ":"))
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Mlp":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class AdamState:
    """Adam moments plus hyperparameters for one parameter vector."""
    n_params: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.n_params)
        if self.v is None:
            self.v = np.zeros(self.n_params)


def adam_update(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One Adam step with bias correction; decay is added to the gradient.

    Updates params in place and returns them. Rejects non-finite gradients.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.shape:
        raise ValueError("params and grads must have equal length")
    if not np.all(np.isfinite(grads)):
        raise ValueError(f"non-finite gradient components: "
                         f"{int(np.sum(~np.isfinite(grads)))}")
    if state.weight_decay != 0.0:
        grads = grads + state.weight_decay * params
    state.step += 1
    state.m[:] = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v[:] = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def numeric_gradient(f, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a flat vector."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.zeros_like(theta)
    probe = theta.copy()
    for i in range(theta.size):
        probe[i] = theta[i] + h
        hi = f(probe)
        probe[i] = theta[i] - h
        lo = f(probe)
        probe[i] = theta[i]
        g[i] = (hi - lo) / (2.0 * h)
    return g


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-6) -> float:
    """Worst-case elementwise relative disagreement between two gradients."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(net: Mlp, x, upstream, h: float = 1e-5) -> float:
    """Finite-difference verification of backward(); returns the max rel err."""
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    net.forward(x)
    analytic = net.backward(upstream)

    def f(theta):
        saved = net.get_params()
        net.set_params(theta)
        out = float(np.sum(net.forward(x) * upstream))
        net.set_params(saved)
        return out

    numeric = numeric_gradient(f, net.get_params(), h)
    return max_relative_error(analytic, numeric)
