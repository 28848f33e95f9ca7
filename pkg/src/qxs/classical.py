"""Classical baselines: ordinary least squares and a small ReLU network.

The linear model is solved in closed form by normal equations, with a ridge
fallback (lambda = 1e-8) when the Gram matrix is singular or effectively so.
An intercept is fitted by default; ``fit_intercept=False`` restores the
intercept-free form.

The network is dense feed-forward with ReLU hidden activations and a linear
scalar output.  Weights use He initialization (stddev sqrt(2 / fan_in)),
biases start at zero, and backprop uses the convention ReLU'(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError, UsageError

__all__ = [
    "LinearModel",
    "ols_fit",
    "NeuralNet",
    "make_nn",
    "nn_parameter_count",
    "nn_forward",
    "nn_forward_batch",
    "nn_gradient",
    "nn_vjp_batch",
    "nn_to_json_dict",
    "nn_from_json_dict",
    "linear_to_json_dict",
    "linear_from_json_dict",
]

RIDGE_LAMBDA = 1e-8
_COND_LIMIT = 1e12


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float = 0.0

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x @ self.weights + self.intercept

    @property
    def parameter_count(self) -> int:
        return self.weights.size + 1


def ols_fit(x: np.ndarray, y: np.ndarray, fit_intercept: bool = True) -> LinearModel:
    """Least-squares fit by normal equations.

    Requires more samples than coefficients and finite data.  A singular (or
    numerically singular, cond > 1e12) Gram matrix falls back to a ridge
    solve with lambda = 1e-8; if that still fails, a NumericalError carries
    the condition estimate.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise UsageError(
            f"need x (samples, features) and matching y; got {x.shape}, {y.shape}"
        )
    n_features = x.shape[1]
    if x.shape[0] <= n_features + 1:
        raise UsageError(
            f"need more than {n_features + 1} samples for {n_features} "
            f"features, got {x.shape[0]}"
        )
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise UsageError("training data must be finite")
    design = np.hstack([x, np.ones((x.shape[0], 1))]) if fit_intercept else x
    gram = design.T @ design
    rhs = design.T @ y
    cond = float(np.linalg.cond(gram))
    if np.isfinite(cond) and cond < _COND_LIMIT:
        coef = np.linalg.solve(gram, rhs)
    else:
        coef = np.linalg.solve(gram + RIDGE_LAMBDA * np.eye(gram.shape[0]), rhs)
    if not np.all(np.isfinite(coef)):
        raise NumericalError(
            f"normal equations unsolvable even with ridge fallback "
            f"(cond estimate {cond:.3e})"
        )
    if fit_intercept:
        return LinearModel(weights=coef[:-1].copy(), intercept=float(coef[-1]))
    return LinearModel(weights=coef.copy(), intercept=0.0)


@dataclass
class NeuralNet:
    """Dense ReLU network; ``weights[i]`` maps layer i to i+1."""

    layer_sizes: list
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    def __post_init__(self):
        sizes = [int(s) for s in self.layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ConfigurationError(
                f"layer_sizes needs >= 2 positive entries, got {sizes}"
            )
        if sizes[-1] != 1:
            raise ConfigurationError(
                f"output layer must have size 1, got {sizes[-1]}"
            )
        self.layer_sizes = sizes
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise UsageError(
                    f"layer {i} shapes {w.shape}/{b.shape} do not match sizes "
                    f"{sizes[i]}->{sizes[i + 1]}"
                )

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters_flat(self) -> np.ndarray:
        pieces = []
        for w, b in zip(self.weights, self.biases):
            pieces.append(w.ravel())
            pieces.append(b.ravel())
        return np.concatenate(pieces)

    def set_parameters_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.parameter_count,):
            raise UsageError(
                f"expected {self.parameter_count} parameters, got {flat.shape}"
            )
        offset = 0
        for i in range(len(self.weights)):
            w = self.weights[i]
            self.weights[i] = flat[offset:offset + w.size].reshape(w.shape).copy()
            offset += w.size
            b = self.biases[i]
            self.biases[i] = flat[offset:offset + b.size].copy()
            offset += b.size


def nn_parameter_count(layer_sizes) -> int:
    sizes = [int(s) for s in layer_sizes]
    return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))


def make_nn(layer_sizes, seed: int = 0) -> NeuralNet:
    """He-initialized network: W ~ N(0, 2/fan_in), biases zero."""
    net = NeuralNet(layer_sizes=list(layer_sizes))
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(net.layer_sizes[:-1], net.layer_sizes[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in))
                       * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return NeuralNet(layer_sizes=net.layer_sizes, weights=weights, biases=biases)


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _forward_pass(net: NeuralNet, x: np.ndarray):
    """Return (activations, pre_activations) per layer for a (batch, n) input."""
    activations = [x]
    pre = []
    a = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if i == last else _relu(z)
        activations.append(a)
    return activations, pre


def nn_forward_batch(net: NeuralNet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != net.layer_sizes[0]:
        raise UsageError(
            f"expected {net.layer_sizes[0]} features per row, got {x.shape[1]}"
        )
    activations, _ = _forward_pass(net, x)
    return activations[-1][:, 0]


def nn_forward(net: NeuralNet, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise UsageError(f"expected a 1-D feature vector, got shape {x.shape}")
    return float(nn_forward_batch(net, x[None, :])[0])


def nn_vjp_batch(net: NeuralNet, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Backprop ``sum_i upstream[i] * dF(x_i)/dparams`` to one flat vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (x.shape[0],):
        raise UsageError(
            f"upstream must have shape ({x.shape[0]},), got {upstream.shape}"
        )
    activations, pre = _forward_pass(net, x)
    # delta: (batch, layer width) gradient w.r.t. pre-activations.
    delta = upstream[:, None].copy()
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w[i] = delta.T @ activations[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ net.weights[i]
            delta = delta * (pre[i - 1] > 0)  # ReLU'(0) = 0
    pieces = []
    for gw, gb in zip(grads_w, grads_b):
        pieces.append(gw.ravel())
        pieces.append(gb.ravel())
    return np.concatenate(pieces)


def nn_gradient(net: NeuralNet, x, upstream: float = 1.0):
    """Per-sample gradients shaped like (weights, biases)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise UsageError(f"expected a 1-D feature vector, got shape {x.shape}")
    flat = nn_vjp_batch(net, x[None, :], np.array([float(upstream)]))
    shaped_w, shaped_b = [], []
    offset = 0
    for w, b in zip(net.weights, net.biases):
        shaped_w.append(flat[offset:offset + w.size].reshape(w.shape))
        offset += w.size
        shaped_b.append(flat[offset:offset + b.size])
        offset += b.size
    return shaped_w, shaped_b


def nn_to_json_dict(net: NeuralNet) -> dict:
    return {
        "kind": "nn",
        "layer_sizes": list(net.layer_sizes),
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def nn_from_json_dict(doc: dict) -> NeuralNet:
    if doc.get("kind") != "nn":
        raise UsageError(f"not an nn document: kind={doc.get('kind')!r}")
    sizes = [int(s) for s in doc["layer_sizes"]]
    weights = [
        np.asarray(flat, dtype=np.float64).reshape(sizes[i + 1], sizes[i])
        for i, flat in enumerate(doc["weights"])
    ]
    biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
    return NeuralNet(layer_sizes=sizes, weights=weights, biases=biases)


def linear_to_json_dict(model: LinearModel) -> dict:
    return {
        "kind": "linear",
        "weights": model.weights.tolist(),
        "intercept": model.intercept,
    }


def linear_from_json_dict(doc: dict) -> LinearModel:
    if doc.get("kind") != "linear":
        raise UsageError(f"not a linear document: kind={doc.get('kind')!r}")
    return LinearModel(
        weights=np.asarray(doc["weights"], dtype=np.float64),
        intercept=float(doc["intercept"]),
    )
