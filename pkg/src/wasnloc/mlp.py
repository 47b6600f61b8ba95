"""Dense ReLU stacks with hand-written backprop and an Adam optimizer.

Everything here is plain numpy. A stack is a list of (W, b) layers; hidden
layers apply ReLU, the final layer is affine only. Forward passes accept a
single vector or a (batch, features) matrix and return a cache from which
``backward`` produces exact analytic gradients for every parameter and for
the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpSpec:
    """Layer output sizes; hidden activations are ReLU, the output is linear."""

    layer_output_sizes: tuple[int, ...] = (625, 625, 625)

    def __post_init__(self):
        if len(self.layer_output_sizes) < 1 or any(s <= 0 for s in self.layer_output_sizes):
            raise ValueError("layer_output_sizes must be non-empty positive integers")


class Mlp:
    """A dense stack with weights held as [(W0, b0), (W1, b1), ...]."""

    def __init__(self, input_size: int, spec: MlpSpec, layers: list[tuple[np.ndarray, np.ndarray]]):
        self.input_size = int(input_size)
        self.spec = spec
        self.layers = layers

    @classmethod
    def init_random(
        cls,
        input_size: int,
        spec: MlpSpec,
        rng: np.random.Generator,
        dtype=np.float32,
    ) -> "Mlp":
        """Seeded init: W uniform in +-sqrt(6 / fan_in), biases zero."""
        layers = []
        fan_in = input_size
        for size in spec.layer_output_sizes:
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, size)).astype(dtype)
            b = np.zeros(size, dtype=dtype)
            layers.append((w, b))
            fan_in = size
        return cls(input_size, spec, layers)

    @property
    def output_size(self) -> int:
        return self.spec.layer_output_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        """Flat view [W0, b0, W1, b1, ...]; arrays are shared, not copied."""
        out = []
        for w, b in self.layers:
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        """Run the stack; returns (output, cache) with cache for backward.

        x may be (input_size,) or (batch, input_size); the output matches.
        """
        x = np.asarray(x)
        squeeze = x.ndim == 1
        a = x[None, :] if squeeze else x
        if a.shape[1] != self.input_size:
            raise ValueError(f"input size {a.shape[1]} != expected {self.input_size}")
        inputs = []
        preacts = []
        n_layers = len(self.layers)
        for k, (w, b) in enumerate(self.layers):
            inputs.append(a)
            z = a @ w + b
            preacts.append(z)
            a = np.maximum(z, 0.0) if k < n_layers - 1 else z
        cache = {"inputs": inputs, "preacts": preacts, "squeeze": squeeze}
        return (a[0] if squeeze else a), cache

    def backward(
        self, cache: dict, upstream: np.ndarray
    ) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
        """Gradients ([(dW, db), ...] per layer, d_input) for a cached forward."""
        if len(cache["inputs"]) != len(self.layers):
            raise ValueError("cache does not match this network")
        upstream = np.asarray(upstream)
        dz = upstream[None, :] if cache["squeeze"] else upstream
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        for k in range(len(self.layers) - 1, -1, -1):
            if k < len(self.layers) - 1:
                dz = dz * (cache["preacts"][k] > 0)
            a_in = cache["inputs"][k]
            grads[k] = (a_in.T @ dz, dz.sum(axis=0))
            dz = dz @ self.layers[k][0].T
        d_input = dz[0] if cache["squeeze"] else dz
        return grads, d_input

    def copy(self) -> "Mlp":
        return Mlp(self.input_size, self.spec, [(w.copy(), b.copy()) for w, b in self.layers])


def flatten_grads(grads: list[tuple[np.ndarray, np.ndarray]]) -> list[np.ndarray]:
    out = []
    for dw, db in grads:
        out.append(dw)
        out.append(db)
    return out


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class AdamState:
    """First/second-moment accumulators for one parameter list."""

    def __init__(self, params: list[np.ndarray]):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0


def adam_step(
    state: AdamState,
    params: list[np.ndarray],
    grads: list[np.ndarray],
    config: AdamConfig,
) -> list[np.ndarray]:
    """One bias-corrected Adam update. Parameters are updated in place."""
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ValueError("params/grads/state lengths disagree")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = g.astype(p.dtype, copy=False)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p -= config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
    return params
