"""Minimal dense-network numerics.

Dense layers with identity/sigmoid/softmax activations, analytic gradients
through the fixed feed-forward topology, an Adam optimizer, and a
central-difference gradient oracle used to validate the analytic path.

Forward and backward operate on batches (one sample per row); thin
single-vector wrappers cover the scoring path. All math is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, TrainingError

ACTIVATIONS = ("identity", "sigmoid", "softmax")


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for overflow safety."""
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass
class DenseLayer:
    """One fully connected layer: y = activation(W x + b).

    weights has shape (out_dim, in_dim), bias has shape (out_dim,).
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ConfigurationError(
                f"weights must be 2-D and bias 1-D, got {self.weights.shape} / {self.bias.shape}"
            )
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ConfigurationError(
                f"bias length {self.bias.shape[0]} does not match out_dim {self.weights.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ConfigurationError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)


def init_dense(in_dim: int, out_dim: int, activation: str, rng: np.random.Generator) -> DenseLayer:
    """Uniform init in [-1/sqrt(in_dim), 1/sqrt(in_dim)], zero bias."""
    limit = 1.0 / np.sqrt(in_dim)
    weights = rng.uniform(-limit, limit, size=(out_dim, in_dim))
    return DenseLayer(weights, np.zeros(out_dim), activation)


def _apply_activation(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "identity":
        return z
    if activation == "sigmoid":
        return sigmoid(z)
    return softmax(z)


def layer_forward(x_batch: np.ndarray, layer: DenseLayer) -> np.ndarray:
    """Forward a (n, in_dim) batch through one layer, returning (n, out_dim)."""
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.ndim != 2 or x_batch.shape[1] != layer.in_dim:
        raise ConfigurationError(
            f"input of shape {x_batch.shape} does not match layer in_dim {layer.in_dim}"
        )
    z = x_batch @ layer.weights.T + layer.bias
    return _apply_activation(z, layer.activation)


def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    """Forward a single input vector through one layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigurationError(f"expected a 1-D input vector, got shape {x.shape}")
    return layer_forward(x[None, :], layer)[0]


@dataclass
class ForwardCache:
    """Activations recorded by a forward pass, sufficient for backward()."""

    layers: list[DenseLayer]
    inputs: list[np.ndarray] = field(default_factory=list)
    outputs: list[np.ndarray] = field(default_factory=list)

    @property
    def batch_size(self) -> int:
        return self.inputs[0].shape[0]


def network_forward_batch(x_batch: np.ndarray, layers: list[DenseLayer]) -> tuple[np.ndarray, ForwardCache]:
    """Forward a batch through a layer stack, caching per-layer activations."""
    if not layers:
        raise ConfigurationError("network must have at least one layer")
    for prev, nxt in zip(layers, layers[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ConfigurationError(
                f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
            )
    cache = ForwardCache(layers=layers)
    out = np.asarray(x_batch, dtype=np.float64)
    for layer in layers:
        cache.inputs.append(out)
        out = layer_forward(out, layer)
        cache.outputs.append(out)
    return out, cache


def network_forward(x: np.ndarray, layers: list[DenseLayer]) -> tuple[np.ndarray, ForwardCache]:
    """Single-vector wrapper around network_forward_batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigurationError(f"expected a 1-D input vector, got shape {x.shape}")
    out, cache = network_forward_batch(x[None, :], layers)
    return out[0], cache


@dataclass
class GradientBundle:
    """Per-layer partials of a scalar loss, shaped like the layer parameters."""

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        """Flat [W0, b0, W1, b1, ...] view matching network_params() order."""
        flat: list[np.ndarray] = []
        for w, b in zip(self.weight_grads, self.bias_grads):
            flat.extend((w, b))
        return flat

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def _activation_backward(d_out: np.ndarray, out: np.ndarray, activation: str) -> np.ndarray:
    """Map dL/d(output) to dL/d(pre-activation), row-wise."""
    if activation == "identity":
        return d_out
    if activation == "sigmoid":
        return d_out * out * (1.0 - out)
    # softmax Jacobian: dz = y * (dy - sum(dy * y))
    inner = np.sum(d_out * out, axis=-1, keepdims=True)
    return out * (d_out - inner)


def backward(grad_wrt_output: np.ndarray, cache: ForwardCache) -> GradientBundle:
    """Analytic partials of the loss w.r.t. every weight and bias.

    grad_wrt_output is dL/d(network output) for the batch the cache was built
    from, shape (n, out_dim) or (out_dim,) for a single-vector pass.
    """
    d_out = np.asarray(grad_wrt_output, dtype=np.float64)
    if d_out.ndim == 1:
        d_out = d_out[None, :]
    last = cache.outputs[-1]
    if d_out.shape != last.shape:
        raise ConfigurationError(
            f"upstream gradient shape {d_out.shape} does not match cached output {last.shape}"
        )
    weight_grads: list[np.ndarray] = [None] * len(cache.layers)  # type: ignore[list-item]
    bias_grads: list[np.ndarray] = [None] * len(cache.layers)  # type: ignore[list-item]
    for idx in range(len(cache.layers) - 1, -1, -1):
        layer = cache.layers[idx]
        d_z = _activation_backward(d_out, cache.outputs[idx], layer.activation)
        weight_grads[idx] = d_z.T @ cache.inputs[idx]
        bias_grads[idx] = d_z.sum(axis=0)
        d_out = d_z @ layer.weights
    return GradientBundle(weight_grads, bias_grads)


def network_params(layers: list[DenseLayer]) -> list[np.ndarray]:
    """Flat [W0, b0, W1, b1, ...] parameter list for the optimizer."""
    params: list[np.ndarray] = []
    for layer in layers:
        params.extend((layer.weights, layer.bias))
    return params


def set_network_params(layers: list[DenseLayer], params: list[np.ndarray]) -> None:
    """Write a flat parameter list back into the layers."""
    if len(params) != 2 * len(layers):
        raise ConfigurationError("parameter list does not match layer count")
    for i, layer in enumerate(layers):
        w, b = params[2 * i], params[2 * i + 1]
        if w.shape != layer.weights.shape or b.shape != layer.bias.shape:
            raise ConfigurationError("parameter shapes do not match the layers")
        layer.weights = np.asarray(w, dtype=np.float64)
        layer.bias = np.asarray(b, dtype=np.float64)


@dataclass
class AdamState:
    """Adam moment buffers plus hyperparameters, one buffer per parameter array."""

    lr: float
    beta1: float
    beta2: float
    eps_stab: float
    step_count: int
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]

    @classmethod
    def init_like(
        cls,
        params: list[np.ndarray],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps_stab: float = 1e-8,
    ) -> "AdamState":
        if lr <= 0 or not (0 < beta1 < 1) or not (0 < beta2 < 1) or eps_stab <= 0:
            raise ConfigurationError("invalid Adam hyperparameters")
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps_stab=eps_stab,
            step_count=0,
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> list[np.ndarray]:
    """One bias-corrected Adam update. Returns new parameter arrays.

    The state is mutated in place (moments and step_count); the input arrays
    are left untouched.
    """
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ConfigurationError("params, grads and state must have matching lengths")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ConfigurationError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient encountered; aborting update")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    updated: list[np.ndarray] = []
    for i, (p, g) in enumerate(zip(params, grads)):
        m = state.first_moment[i]
        v = state.second_moment[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        updated.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps_stab))
    return updated


def finite_diff_grad(loss_fn, params: list[np.ndarray], h: float) -> list[np.ndarray]:
    """Central-difference gradient oracle: (L(p+h) - L(p-h)) / 2h per entry.

    loss_fn takes the full parameter list and returns a scalar; it must be
    deterministic. The input arrays are not modified.
    """
    if h <= 0:
        raise ConfigurationError("step h must be positive")
    work = [np.array(p, dtype=np.float64) for p in params]
    grads = [np.zeros_like(p) for p in work]
    for i, p in enumerate(work):
        flat = p.reshape(-1)
        gflat = grads[i].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = loss_fn(work)
            flat[j] = orig - h
            down = loss_fn(work)
            flat[j] = orig
            gflat[j] = (up - down) / (2.0 * h)
    return grads
