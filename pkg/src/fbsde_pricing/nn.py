"""Small feedforward networks approximating Z at each time step, plus Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor, dense, parameter
from .errors import ConfigError, DimensionMismatch

ACTIVATIONS = ("tanh", "relu")


def layer_sizes(d):
    """Input d, two hidden layers of width d + 10, output d."""
    return [d, d + 10, d + 10, d]


def _activate(x, activation):
    if activation == "tanh":
        return x.tanh() if isinstance(x, Tensor) else np.tanh(x)
    if activation == "relu":
        return x.relu() if isinstance(x, Tensor) else np.maximum(x, 0)
    raise ConfigError(f"unknown activation {activation!r}", "protocol.activation")


@dataclass
class SubNetwork:
    """Affine layers with a hidden-layer nonlinearity and linear output."""

    weights: list
    biases: list
    activation: str = "tanh"

    @property
    def dims(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def parameters(self):
        return [p for pair in zip(self.weights, self.biases) for p in pair]


def init_parameters(dims, seed, activation="tanh", dtype=np.float64):
    """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return SubNetwork(weights, biases, activation)


def net_eval(net, x):
    """Evaluate ``net`` on inputs with trailing axis of size ``dims[0]``."""
    if np.shape(x)[-1] != net.dims[0]:
        raise DimensionMismatch(f"expected input of size {net.dims[0]}, got {np.shape(x)[-1]}")
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if k < last:
            h = _activate(h, net.activation)
    return h


class SubNetworkStack:
    """One :class:`SubNetwork` per time step, stored as stacked parameter arrays.

    Evaluation is feature-major: inputs are (S, d, M), layer ``l`` weights
    are (S, fan_out, fan_in) and biases (S, fan_out, 1), so every step is
    handled by one batched matmul per layer. ``extras`` holds optional
    trainable leaves (``y0`` and ``z0`` of the forward method).
    """

    def __init__(self, dims, count, seed, activation="tanh", dtype=np.float32, extras=None):
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}", "protocol.activation")
        nets = [init_parameters(dims, [seed, i], activation, dtype) for i in range(count)]
        self.dims = list(dims)
        self.activation = activation
        layers = range(len(dims) - 1)
        self.weights = [parameter(np.ascontiguousarray(np.stack([n.weights[l].T for n in nets])))
                        for l in layers]
        self.biases = [parameter(np.stack([n.biases[l][:, None] for n in nets])) for l in layers]
        self.extras = {k: parameter(np.asarray(v, dtype=np.float64)) for k, v in (extras or {}).items()}

    def __len__(self):
        return self.weights[0].shape[0]

    @property
    def dtype(self):
        return self.weights[0].data.dtype

    @property
    def parameters(self):
        params = [p for pair in zip(self.weights, self.biases) for p in pair]
        return params + list(self.extras.values())

    def network(self, i):
        """Step ``i`` as a standalone :class:`SubNetwork` (views, not copies)."""
        return SubNetwork([w.data[i].T for w in self.weights],
                          [b.data[i, :, 0] for b in self.biases], self.activation)

    def __call__(self, x):
        """``x`` has shape (S, d, M); returns a Tensor of shape (S, d, M)."""
        if x.ndim != 3 or x.shape[0] != len(self) or x.shape[1] != self.dims[0]:
            raise DimensionMismatch(f"expected ({len(self)}, {self.dims[0]}, M), got {x.shape}")
        h = Tensor(np.asarray(x, dtype=self.dtype))
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = dense(h, w, b, self.activation if k < last else None)
        return h


@dataclass
class AdamState:
    learning_rate: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


def adam_update(params, grads, state):
    """One bias-corrected Adam step, applied in place to ``params``.

    ``params`` may be arrays or Tensors; returns ``(params, state)``.
    """
    arrays = [p.data if isinstance(p, Tensor) else p for p in params]
    if not state.first_moment:
        state.first_moment = [np.zeros_like(a) for a in arrays]
        state.second_moment = [np.zeros_like(a) for a in arrays]
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    step = state.learning_rate * np.sqrt(1.0 - b2**t) / (1.0 - b1**t)
    for a, g, m, v in zip(arrays, grads, state.first_moment, state.second_moment):
        if g.shape != a.shape:
            raise DimensionMismatch(f"gradient shape {g.shape} != parameter shape {a.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        a -= (step * m / (np.sqrt(v) + state.eps * np.sqrt(1.0 - b2**t))).astype(a.dtype, copy=False)
    return params, state
