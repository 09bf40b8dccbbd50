"""Feedforward networks with hand-written backprop, Adam and a gradient checker.

Everything runs in float64. Networks accept a single vector or a batch
(rows are samples); gradients are always summed over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, DomainError, ProtocolError

ACTIVATIONS = ("relu", "tanh")


class MLP:
    """Fully connected network, hidden activation ``relu`` or ``tanh``,
    identity output.

    Parameters are stored as ``[W0, b0, W1, b1, ...]`` with ``W`` shaped
    ``(n_in, n_out)``. Initialization is uniform in ``+-1/sqrt(fan_in)``
    for weights and biases, drawn from ``seed``.
    """

    def __init__(self, layer_sizes: Sequence[int], activation: str = "relu", seed: int | np.random.Generator = 0):
        sizes = [int(n) for n in layer_sizes]
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise DimensionError(f"layer_sizes needs >= 2 positive entries, got {layer_sizes}")
        if activation not in ACTIVATIONS:
            raise DomainError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
        self.layer_sizes = sizes
        self.activation = activation
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.params: list[np.ndarray] = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            self.params.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            self.params.append(rng.uniform(-bound, bound, size=n_out))
        self._cache: Optional[tuple[bool, list[np.ndarray], list[np.ndarray]]] = None

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.layer_sizes = list(self.layer_sizes)
        clone.activation = self.activation
        clone.params = [p.copy() for p in self.params]
        clone._cache = None
        return clone

    def _act(self, z: np.ndarray) -> np.ndarray:
        return np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)

    def _act_grad(self, z: np.ndarray, h: np.ndarray) -> np.ndarray:
        return (z > 0.0).astype(np.float64) if self.activation == "relu" else 1.0 - h * h

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.ndim != 2 or h.shape[1] != self.layer_sizes[0]:
            raise DimensionError(f"expected input width {self.layer_sizes[0]}, got shape {x.shape}")
        inputs, pre = [], []
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            inputs.append(h)
            z = h @ W + b
            pre.append(z)
            h = z if i == self.n_layers - 1 else self._act(z)
        self._cache = (single, inputs, pre)
        return h[0] if single else h

    def backward(self, grad_output: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Reverse-mode gradients of ``sum(output * grad_output)``.

        Uses the activations of the most recent :meth:`forward`. Returns
        ``(param_grads, input_grad)`` with ``param_grads`` aligned to
        :attr:`params`.
        """
        if self._cache is None:
            raise ProtocolError("backward() requires a preceding forward()")
        single, inputs, pre = self._cache
        g = np.asarray(grad_output, dtype=np.float64)
        g = g[None, :] if single else g
        if g.shape != pre[-1].shape:
            raise DimensionError(f"output gradient shape {g.shape} != output shape {pre[-1].shape}")
        grads: list[np.ndarray] = [np.empty(0)] * len(self.params)
        for i in reversed(range(self.n_layers)):
            if i != self.n_layers - 1:
                z = pre[i]
                g = g * self._act_grad(z, self._act(z) if self.activation == "tanh" else z)
            grads[2 * i] = inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.params[2 * i].T
        return grads, (g[0] if single else g)


@dataclass
class Adam:
    """Adaptive-moment optimizer state for one parameter list."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 3e-4, **kw) -> "Adam":
        return cls(lr=lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **kw)

    def step(self, params: list[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        opt_step(params, grads, self)


def opt_step(params: list[np.ndarray], grads: Sequence[np.ndarray], opt: Adam) -> list[np.ndarray]:
    """Bias-corrected Adam update, applied in place; returns ``params``."""
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise DimensionError("parameter and gradient shapes differ")
    if not opt.m:
        opt.m = [np.zeros_like(p) for p in params]
        opt.v = [np.zeros_like(p) for p in params]
    opt.t += 1
    c1 = 1.0 - opt.beta1**opt.t
    c2 = 1.0 - opt.beta2**opt.t
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        p -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return params


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradcheckReport:
    trials: int
    tolerance: float
    max_rel_error: float
    architectures: list[tuple[tuple[int, ...], str]]

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-6)
    return float(np.max(np.abs(a - b) / denom))


def check_gradients(net: MLP, x: np.ndarray, weights: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between :meth:`MLP.backward` and central differences
    for the scalar ``sum(net(x) * weights)``, over parameters and inputs."""
    net.forward(x)
    param_grads, input_grad = net.backward(weights)

    def loss() -> float:
        return float(np.sum(net.forward(x) * weights))

    worst = 0.0
    for p, g in zip(net.params, param_grads):
        numeric = np.empty_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = loss()
            flat[k] = orig - h
            down = loss()
            flat[k] = orig
            nflat[k] = (up - down) / (2.0 * h)
        worst = max(worst, _rel_error(g, numeric))

    x = np.array(x, dtype=np.float64)
    numeric = np.empty_like(x)
    xf, nf = x.reshape(-1), numeric.reshape(-1)
    for k in range(xf.size):
        orig = xf[k]
        xf[k] = orig + h
        up = float(np.sum(net.forward(x) * weights))
        xf[k] = orig - h
        down = float(np.sum(net.forward(x) * weights))
        xf[k] = orig
        nf[k] = (up - down) / (2.0 * h)
    return max(worst, _rel_error(input_grad, numeric))


def gradcheck(n_trials: int = 10, tolerance: float = 1e-4, seed: int = 0, net_factory=MLP) -> GradcheckReport:
    """Compare analytic and finite-difference gradients on random networks.

    Each trial draws a fresh architecture (1-3 hidden layers of width 1-8,
    relu or tanh), a batch of inputs and random output weights.
    """
    if n_trials < 1:
        raise DomainError(f"n_trials must be >= 1, got {n_trials}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    archs = []
    for _ in range(n_trials):
        depth = int(rng.integers(1, 4))
        sizes = [int(rng.integers(1, 9)) for _ in range(depth + 2)]
        activation = ACTIVATIONS[int(rng.integers(0, 2))]
        net = net_factory(sizes, activation, seed=rng)
        x = rng.normal(size=(int(rng.integers(1, 5)), sizes[0]))
        weights = rng.normal(size=(x.shape[0], sizes[-1]))
        worst = max(worst, check_gradients(net, x, weights))
        archs.append((tuple(sizes), activation))
    return GradcheckReport(n_trials, tolerance, worst, archs)
