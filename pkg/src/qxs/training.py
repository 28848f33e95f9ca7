"""Mini-batch MSE training shared by every trainable model family.

A model spec (linear / nn / qcl / tn) builds its model from the window's
feature count and the config seed, then the same loop runs for all of them:
seeded shuffle each epoch, fixed-size mini-batches, Adam or plain SGD, exactly
``epochs`` passes, last-epoch parameters kept (no early stopping).  OLS is the
exception: it solves in closed form and skips the loop.

Targets can be affinely rescaled to [-1, 1] (``target_rescale="to_symmetric"``,
the right choice for the qcl family whose output is <Z> in [-1, 1]); trained
predictors apply the inverse map, which is order-preserving, so downstream
rank-based selection never sees the rescale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import classical, mps, qcl
from .errors import ConfigurationError, TrainingDiverged, UsageError, ValidationError

__all__ = [
    "TrainConfig",
    "AdamState",
    "mse",
    "adam_step",
    "sgd_step",
    "epoch_batches",
    "LinearSpec",
    "NeuralNetSpec",
    "QclSpec",
    "MpsSpec",
    "RandomScoreSpec",
    "TrainedPredictor",
    "fit",
]

OPTIMIZERS = ("adam", "sgd")
TARGET_RESCALES = ("none", "to_symmetric")

# Fixed salt so the shuffle stream never collides with model-init draws that
# use the same config seed.
_SHUFFLE_SALT = 0x5F1E


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 20
    batch_size: int = 64
    seed: int = 0
    target_rescale: str = "none"

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(
                f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}"
            )
        if self.target_rescale not in TARGET_RESCALES:
            raise ConfigurationError(
                f"target_rescale must be one of {TARGET_RESCALES}, "
                f"got {self.target_rescale!r}"
            )
        if not self.learning_rate > 0:
            raise ConfigurationError(
                f"learning_rate must be positive, got {self.learning_rate}"
            )
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(
                f"batch_size must be >= 1, got {self.batch_size}"
            )
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigurationError("adam betas must lie in [0, 1)")


def mse(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error over one window."""
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape or predictions.ndim != 1:
        raise UsageError(
            f"predictions and targets must be matching 1-D arrays, got "
            f"{predictions.shape} and {targets.shape}"
        )
    if predictions.size == 0:
        raise UsageError("cannot average an empty window")
    return float(np.mean((predictions - targets) ** 2))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n_params: int) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params))


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState,
              t: int, cfg: TrainConfig):
    """One bias-corrected Adam update; returns (new_params, new_state).

    With fresh state the first step has magnitude
    lr * |g| / (|g| + eps) per coordinate.
    """
    if t < 1:
        raise UsageError(f"step index t must be >= 1, got {t}")
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    m = b1 * state.m + (1 - b1) * grad
    v = b2 * state.v + (1 - b2) * grad ** 2
    m_hat = m / (1 - b1 ** t)
    v_hat = v / (1 - b2 ** t)
    new_params = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return new_params, AdamState(m=m, v=v)


def sgd_step(params: np.ndarray, grad: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    return params - cfg.learning_rate * grad


def epoch_batches(rng: np.random.Generator, n_samples: int, batch_size: int):
    """Split a fresh permutation of range(n_samples) into batch index arrays.

    Every sample appears exactly once; the last batch may be short.
    """
    if n_samples < 1:
        raise UsageError("need at least one sample")
    order = rng.permutation(n_samples)
    return [order[i:i + batch_size] for i in range(0, n_samples, batch_size)]


# --- model specs: hyperparameters + how to build/describe each family -------


@dataclass(frozen=True)
class LinearSpec:
    kind: str = "linear"
    fit_intercept: bool = True

    def parameter_count(self, n_features: int) -> int:
        return n_features + 1

    def hyperparams(self) -> dict:
        return {"fit_intercept": self.fit_intercept}


@dataclass(frozen=True)
class NeuralNetSpec:
    layer_sizes: tuple
    kind: str = "nn"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))

    def parameter_count(self, n_features: int) -> int:
        if self.layer_sizes[0] != n_features:
            raise ConfigurationError(
                f"network expects {self.layer_sizes[0]} inputs but the window "
                f"has {n_features} features"
            )
        return classical.nn_parameter_count(self.layer_sizes)

    def hyperparams(self) -> dict:
        return {"layer_sizes": list(self.layer_sizes)}

    def build(self, n_features: int, seed: int) -> classical.NeuralNet:
        self.parameter_count(n_features)
        return classical.make_nn(self.layer_sizes, seed=seed)


@dataclass(frozen=True)
class QclSpec:
    depth: int = 3
    tau: float = qcl.DEFAULT_TAU
    kind: str = "qcl"

    def parameter_count(self, n_features: int) -> int:
        return 3 * n_features * self.depth

    def hyperparams(self) -> dict:
        return {"depth": self.depth, "tau": self.tau}

    def build(self, n_features: int, seed: int) -> qcl.QclModel:
        return qcl.init_qcl(n_features, self.depth, tau=self.tau, seed=seed)


@dataclass(frozen=True)
class MpsSpec:
    bond_dim: int = 2
    noise_scale: float = mps.DEFAULT_NOISE_SCALE
    kind: str = "tn"

    def parameter_count(self, n_features: int) -> int:
        return mps.mps_parameter_count(n_features, self.bond_dim)

    def hyperparams(self) -> dict:
        return {"bond_dim": self.bond_dim, "noise_scale": self.noise_scale}

    def build(self, n_features: int, seed: int) -> mps.MpsWeights:
        return mps.init_mps(n_features, self.bond_dim, seed=seed,
                            noise_scale=self.noise_scale)


@dataclass(frozen=True)
class RandomScoreSpec:
    """Null baseline: seeded random scores, no training.  Calibration only."""

    kind: str = "random"

    def parameter_count(self, n_features: int) -> int:
        return 0

    def hyperparams(self) -> dict:
        return {}


class _RandomScorer:
    def __init__(self, seed: int):
        self.seed = seed
        self._rng = np.random.default_rng([int(seed), 0xD1CE])

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self._rng.uniform(0.0, 1.0, size=np.asarray(x).shape[0])


@dataclass
class _Trainable:
    """Flat-parameter view over one model: the loop only sees this."""

    get: callable
    set: callable
    forward: callable  # (batch, n) -> (batch,)
    vjp: callable      # (x, upstream) -> flat gradient, summed over rows


def _trainable_for(model) -> _Trainable:
    if isinstance(model, classical.NeuralNet):
        return _Trainable(
            get=model.parameters_flat,
            set=model.set_parameters_flat,
            forward=lambda x: classical.nn_forward_batch(model, x),
            vjp=lambda x, up: classical.nn_vjp_batch(model, x, up),
        )
    if isinstance(model, mps.MpsWeights):
        return _Trainable(
            get=model.parameters_flat,
            set=model.set_parameters_flat,
            forward=lambda x: mps.mps_forward_batch(model, x),
            vjp=lambda x, up: mps.mps_vjp_batch(model, x, up),
        )
    if isinstance(model, qcl.QclModel):
        return _Trainable(
            get=model.parameters_flat,
            set=model.set_parameters_flat,
            forward=lambda x: qcl.qcl_forward_batch(model, x),
            vjp=lambda x, up: qcl.qcl_vjp_batch(model, x, up),
        )
    raise UsageError(f"no trainable adapter for {type(model).__name__}")


@dataclass
class TrainedPredictor:
    """A fitted model plus everything needed to score new cross-sections."""

    kind: str
    model: object
    loss_trace: np.ndarray
    target_rescale: str = "none"

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Scores for each row, mapped back from any training-side rescale."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "linear":
            raw = self.model.predict(x)
        elif self.kind == "nn":
            raw = classical.nn_forward_batch(self.model, x)
        elif self.kind == "tn":
            raw = mps.mps_forward_batch(self.model, x)
        elif self.kind == "qcl":
            raw = qcl.qcl_forward_batch(self.model, x)
        elif self.kind == "random":
            raw = self.model.predict(x)
        else:
            raise UsageError(f"unknown predictor kind {self.kind!r}")
        if self.target_rescale == "to_symmetric":
            return (raw + 1.0) / 2.0
        return raw

    def model_json(self) -> dict:
        if self.kind == "linear":
            return classical.linear_to_json_dict(self.model)
        if self.kind == "nn":
            return classical.nn_to_json_dict(self.model)
        if self.kind == "tn":
            return mps.mps_to_json_dict(self.model)
        if self.kind == "qcl":
            return qcl.qcl_to_json_dict(self.model)
        if self.kind == "random":
            return {"kind": "random", "seed": self.model.seed}
        raise UsageError(f"unknown predictor kind {self.kind!r}")


def _validate_window(x: np.ndarray, y: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise UsageError(
            f"need x (samples, features) and matching y; got {x.shape}, {y.shape}"
        )
    if x.shape[0] == 0:
        raise UsageError("training window is empty")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("training window contains non-finite values")
    if x.size and (x.min() < -1e-9 or x.max() > 1.0 + 1e-9):
        raise ValidationError(
            f"features must be rank-transformed into [0, 1]; observed range "
            f"[{x.min()!r}, {x.max()!r}]"
        )
    return x, y


def fit(spec, x: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> TrainedPredictor:
    """Fit one model spec on a training window of rank-transformed rows.

    Returns the last-epoch parameters with a loss trace of length
    ``cfg.epochs`` (full-window MSE in training-target space after each
    epoch; closed-form fits report their fitted loss as a constant trace).
    """
    x, y = _validate_window(x, y)
    y_train = 2.0 * y - 1.0 if cfg.target_rescale == "to_symmetric" else y

    if isinstance(spec, LinearSpec):
        model = classical.ols_fit(x, y_train, fit_intercept=spec.fit_intercept)
        loss = mse(model.predict(x), y_train)
        return TrainedPredictor(
            kind=spec.kind, model=model,
            loss_trace=np.full(cfg.epochs, loss),
            target_rescale=cfg.target_rescale,
        )
    if isinstance(spec, RandomScoreSpec):
        return TrainedPredictor(
            kind=spec.kind, model=_RandomScorer(cfg.seed),
            loss_trace=np.zeros(cfg.epochs),
            target_rescale="none",
        )

    model = spec.build(x.shape[1], seed=cfg.seed)
    trainable = _trainable_for(model)
    params = trainable.get()
    adam_state = AdamState.zeros(params.size)
    shuffle_rng = np.random.default_rng([int(cfg.seed), _SHUFFLE_SALT])
    step = 0
    trace = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        for batch_no, batch in enumerate(
                epoch_batches(shuffle_rng, x.shape[0], cfg.batch_size)):
            xb = x[batch]
            preds = trainable.forward(xb)
            residual = preds - y_train[batch]
            # Overflow to inf here IS the divergence signal, not an error.
            with np.errstate(over="ignore"):
                batch_loss = float(np.mean(residual ** 2))
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(epoch=epoch, batch=batch_no, loss=batch_loss)
            grad = (2.0 / batch.size) * trainable.vjp(xb, residual)
            step += 1
            if cfg.optimizer == "adam":
                params, adam_state = adam_step(params, grad, adam_state, step, cfg)
            else:
                params = sgd_step(params, grad, cfg)
            if not np.all(np.isfinite(params)):
                raise TrainingDiverged(epoch=epoch, batch=batch_no, loss=batch_loss)
            trainable.set(params)
        trace[epoch] = mse(trainable.forward(x), y_train)
        if not np.isfinite(trace[epoch]):
            raise TrainingDiverged(epoch=epoch, batch=-1, loss=float(trace[epoch]))
    return TrainedPredictor(
        kind=spec.kind, model=model, loss_trace=trace,
        target_rescale=cfg.target_rescale,
    )
