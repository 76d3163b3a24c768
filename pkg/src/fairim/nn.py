"""Small dense networks with hand-written backpropagation (numpy, float64)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .rng import SplitMix64

ACTIVATIONS = ("relu", "sigmoid", "identity")
BCE_EPS = 1e-12


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        # split by sign so large |z| never overflows exp
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray, grad_a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return grad_a * (z > 0)
    if name == "sigmoid":
        return grad_a * a * (1.0 - a)
    return grad_a


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        acts = tuple(self.activations)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activations", acts)
        if len(sizes) < 2:
            raise ConfigError("an MLP needs at least an input and an output size")
        if any(s < 1 for s in sizes):
            raise ConfigError(f"layer sizes must be positive: {sizes}")
        if len(acts) != len(sizes) - 1:
            raise ConfigError(f"{len(sizes) - 1} layers need as many activations, got {len(acts)}")
        bad = [a for a in acts if a not in ACTIVATIONS]
        if bad:
            raise ConfigError(f"unknown activation(s) {bad}; choose from {ACTIVATIONS}")

    def to_dict(self) -> dict:
        return {"layer_sizes": list(self.layer_sizes), "activations": list(self.activations)}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(tuple(d["layer_sizes"]), tuple(d["activations"]))


class StaleCacheError(RuntimeError):
    pass


@dataclass(frozen=True)
class ForwardCache:
    owner: int
    version: int
    inputs: tuple[np.ndarray, ...]
    pre: tuple[np.ndarray, ...]
    post: tuple[np.ndarray, ...]


class MLP:
    """Affine + activation layers. Weights ``W[i]`` have shape ``(fan_in, fan_out)``.

    ``version`` increments whenever parameters change; a cache produced by an
    older version is rejected by :meth:`backward`.
    """

    def __init__(self, spec: MlpSpec, rng: SplitMix64 | None = None):
        self.spec = spec
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        self.version = 0
        for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                bound = np.sqrt(6.0 / (fan_in + fan_out))
                w = (2.0 * rng.uniform_array(fan_in * fan_out) - 1.0).reshape(fan_in, fan_out) * bound
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def touch(self) -> None:
        self.version += 1

    def copy(self) -> "MLP":
        other = MLP.__new__(MLP)
        other.spec = self.spec
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        other.version = 0
        return other

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.spec.layer_sizes[0]:
            raise ValueError(f"expected input width {self.spec.layer_sizes[0]}, got shape {x.shape}")
        inputs, pre, post = [], [], []
        a = x
        for w, b, act in zip(self.weights, self.biases, self.spec.activations):
            inputs.append(a)
            z = a @ w + b
            a = _act(act, z)
            pre.append(z)
            post.append(a)
        cache = ForwardCache(id(self), self.version, tuple(inputs), tuple(pre), tuple(post))
        return (a[0] if squeeze else a), cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: ForwardCache, grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients ``[dW0, db0, dW1, db1, ...]`` and the gradient w.r.t. the input."""
        if cache.owner != id(self) or cache.version != self.version:
            raise StaleCacheError("forward cache does not match the current parameters")
        g = np.asarray(grad_out, dtype=np.float64)
        squeeze = g.ndim == 1
        if squeeze:
            g = g[None, :]
        grads: list[np.ndarray] = []
        for i in reversed(range(len(self.weights))):
            gz = _act_grad(self.spec.activations[i], cache.pre[i], cache.post[i], g)
            grads.append(gz.sum(axis=0))
            grads.append(cache.inputs[i].T @ gz)
            g = gz @ self.weights[i].T
        grads.reverse()
        return grads, (g[0] if squeeze else g)

    def clip_(self, c: float) -> None:
        for p in self.params:
            np.clip(p, -c, c, out=p)
        self.touch()

    def max_abs_param(self) -> float:
        return max(float(np.abs(p).max()) for p in self.params)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "layers": [
                {"shape": list(w.shape), "W": w.ravel().tolist(), "b": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLP":
        net = cls(MlpSpec.from_dict(d["spec"]))
        for i, layer in enumerate(d["layers"]):
            w = np.array(layer["W"], dtype=np.float64).reshape(layer["shape"])
            if w.shape != net.weights[i].shape:
                raise ValueError(f"layer {i}: stored shape {w.shape} does not match spec")
            net.weights[i] = w
            net.biases[i] = np.array(layer["b"], dtype=np.float64)
        return net


class Adam:
    def __init__(self, params: Sequence[np.ndarray], lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        """In-place descent step on ``params``."""
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------- losses


def bce_loss(output: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. ``output``.

    Outputs are clamped to ``[eps, 1-eps]`` so the loss stays finite.
    """
    out = np.clip(output, BCE_EPS, 1.0 - BCE_EPS)
    t = np.asarray(target, dtype=np.float64)
    loss = -np.mean(t * np.log(out) + (1.0 - t) * np.log1p(-out))
    inside = (output > BCE_EPS) & (output < 1.0 - BCE_EPS)
    grad = np.where(inside, (out - t) / (out * (1.0 - out)), 0.0) / out.size
    return float(loss), grad


def mse_loss(output: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient."""
    diff = output - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


LOSSES = {"bce": bce_loss, "mse": mse_loss}


def reconstruction_loss(output: np.ndarray, target: np.ndarray, kind: str = "bce") -> float:
    return LOSSES[kind](output, target)[0]
