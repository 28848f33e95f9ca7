"""Optimizer oracles and the fit() loop: determinism, convergence,
divergence detection, and target rescaling."""

import numpy as np
import pytest

from qxs import (
    AdamState,
    ConfigurationError,
    LinearSpec,
    MpsSpec,
    NeuralNetSpec,
    QclSpec,
    RandomScoreSpec,
    TrainConfig,
    TrainingDiverged,
    UsageError,
    ValidationError,
    adam_step,
    fit,
    mse,
    sgd_step,
)
from qxs.training import epoch_batches


def _linear_window(n=200, f=4, seed=0, noise=0.02):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, size=(n, f))
    w = np.array([0.8, -0.5, 0.3, 0.1])[:f]
    y = x @ w + 0.1 + rng.normal(scale=noise, size=n)
    return x, y


def test_mse_oracle():
    assert mse(np.array([1.0, 2.0]), np.array([0.0, 4.0])) == pytest.approx(2.5)
    with pytest.raises(UsageError):
        mse(np.array([1.0]), np.array([1.0, 2.0]))


def test_adam_first_step_magnitude():
    cfg = TrainConfig(learning_rate=0.05)
    params = np.array([1.0, -2.0, 0.0])
    grad = np.array([3.0, -0.5, 0.0])
    new, _ = adam_step(params, grad, AdamState.zeros(3), t=1, cfg=cfg)
    # Bias correction makes the first update lr * g / (|g| + eps).
    expected = params - 0.05 * grad / (np.abs(grad) + cfg.adam_eps)
    np.testing.assert_allclose(new, expected, atol=1e-12)


def test_adam_matches_reference_implementation():
    cfg = TrainConfig(learning_rate=0.1, adam_beta1=0.9, adam_beta2=0.999,
                      adam_eps=1e-8)
    rng = np.random.default_rng(1)
    params = rng.normal(size=5)
    state = AdamState.zeros(5)
    # Independent reference, written from the update equations.
    ref_p = params.copy()
    ref_m = np.zeros(5)
    ref_v = np.zeros(5)
    for t in range(1, 8):
        grad = rng.normal(size=5)
        params, state = adam_step(params, grad, state, t=t, cfg=cfg)
        ref_m = 0.9 * ref_m + 0.1 * grad
        ref_v = 0.999 * ref_v + 0.001 * grad ** 2
        m_hat = ref_m / (1 - 0.9 ** t)
        v_hat = ref_v / (1 - 0.999 ** t)
        ref_p = ref_p - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
        np.testing.assert_allclose(params, ref_p, atol=1e-14)


def test_adam_minimizes_quadratic():
    cfg = TrainConfig(learning_rate=0.1)
    target = np.array([3.0, -1.0])
    params = np.zeros(2)
    state = AdamState.zeros(2)
    for t in range(1, 300):
        grad = 2.0 * (params - target)
        params, state = adam_step(params, grad, state, t=t, cfg=cfg)
    np.testing.assert_allclose(params, target, atol=1e-3)


def test_sgd_step_exact():
    cfg = TrainConfig(optimizer="sgd", learning_rate=0.5)
    new = sgd_step(np.array([1.0, 2.0]), np.array([2.0, -2.0]), cfg)
    np.testing.assert_array_equal(new, [0.0, 3.0])


def test_epoch_batches_partition():
    rng = np.random.default_rng(0)
    batches = epoch_batches(rng, 10, 3)
    assert [len(b) for b in batches] == [3, 3, 3, 1]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))


def test_epoch_batches_deterministic():
    a = epoch_batches(np.random.default_rng(5), 20, 7)
    b = epoch_batches(np.random.default_rng(5), 20, 7)
    for ba, bb in zip(a, b):
        np.testing.assert_array_equal(ba, bb)


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(optimizer="lbfgs")
    with pytest.raises(ConfigurationError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigurationError):
        TrainConfig(target_rescale="standardize")


def test_linear_fit_matches_closed_form():
    x, y = _linear_window()
    cfg = TrainConfig(epochs=7, seed=0)
    predictor = fit(LinearSpec(), x, y, cfg)
    assert predictor.loss_trace.shape == (7,)
    assert np.all(predictor.loss_trace == predictor.loss_trace[0])
    from qxs import ols_fit

    direct = ols_fit(x, y)
    np.testing.assert_allclose(predictor.predict(x), direct.predict(x),
                               atol=1e-12)


def test_nn_training_reduces_loss():
    x, y = _linear_window(n=300)
    cfg = TrainConfig(epochs=15, batch_size=32, seed=1)
    predictor = fit(NeuralNetSpec(layer_sizes=(4, 6, 1)), x, y, cfg)
    assert predictor.loss_trace[-1] < predictor.loss_trace[0]
    assert predictor.loss_trace[-1] < 0.01


def test_mps_training_reduces_loss():
    x, y = _linear_window(n=300)
    cfg = TrainConfig(epochs=10, batch_size=32, seed=2)
    predictor = fit(MpsSpec(bond_dim=2), x, y, cfg)
    assert predictor.loss_trace[-1] < predictor.loss_trace[0]


def test_qcl_training_runs_and_descends():
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 1, size=(60, 2))
    y = 0.5 * x[:, 0] + 0.25
    cfg = TrainConfig(epochs=4, batch_size=16, seed=3,
                      target_rescale="to_symmetric")
    predictor = fit(QclSpec(depth=1), x, y, cfg)
    assert predictor.loss_trace.shape == (4,)
    assert predictor.loss_trace[-1] < predictor.loss_trace[0]


def test_training_is_seed_deterministic():
    x, y = _linear_window(n=150)
    cfg = TrainConfig(epochs=5, batch_size=16, seed=7)
    a = fit(NeuralNetSpec(layer_sizes=(4, 5, 1)), x, y, cfg)
    b = fit(NeuralNetSpec(layer_sizes=(4, 5, 1)), x, y, cfg)
    np.testing.assert_array_equal(a.loss_trace, b.loss_trace)
    np.testing.assert_array_equal(a.predict(x), b.predict(x))
    other = fit(NeuralNetSpec(layer_sizes=(4, 5, 1)), x, y,
                TrainConfig(epochs=5, batch_size=16, seed=8))
    assert not np.array_equal(a.loss_trace, other.loss_trace)


def test_divergence_raises_with_location():
    x, y = _linear_window(n=80)
    y = y + 1e200  # forces an infinite squared error immediately
    cfg = TrainConfig(epochs=3, batch_size=16, seed=0)
    with pytest.raises(TrainingDiverged) as excinfo:
        fit(NeuralNetSpec(layer_sizes=(4, 3, 1)), x, y, cfg)
    assert excinfo.value.epoch == 0
    assert excinfo.value.batch == 0


def test_target_rescale_round_trip():
    x, y = _linear_window(n=100)
    y = np.clip(y, 0.0, 1.0)
    cfg = TrainConfig(epochs=2, batch_size=32, seed=4,
                      target_rescale="to_symmetric")
    predictor = fit(MpsSpec(bond_dim=2), x, y, cfg)
    from qxs import mps_forward_batch

    raw = mps_forward_batch(predictor.model, x)
    np.testing.assert_allclose(predictor.predict(x), (raw + 1.0) / 2.0,
                               atol=1e-14)


def test_linear_rescale_predictions_are_consistent():
    # Rescaling the targets must not change the linear model's ranking.
    x, y = _linear_window(n=100)
    y = np.clip(y, 0.0, 1.0)
    plain = fit(LinearSpec(), x, y, TrainConfig(epochs=1, seed=0))
    rescaled = fit(LinearSpec(), x, y,
                   TrainConfig(epochs=1, seed=0, target_rescale="to_symmetric"))
    np.testing.assert_allclose(plain.predict(x), rescaled.predict(x),
                               atol=1e-9)


def test_random_scorer_is_seeded_and_uniform():
    x, y = _linear_window(n=50)
    a = fit(RandomScoreSpec(), x, y, TrainConfig(epochs=1, seed=5))
    b = fit(RandomScoreSpec(), x, y, TrainConfig(epochs=1, seed=5))
    pa = a.predict(x)
    np.testing.assert_array_equal(pa, b.predict(x))
    assert np.all((pa >= 0) & (pa <= 1))
    # Successive calls advance the stream (scores at a later month differ).
    assert not np.array_equal(pa, a.predict(x))
    assert RandomScoreSpec().parameter_count(10) == 0


def test_spec_parameter_counts():
    assert LinearSpec().parameter_count(10) == 11
    assert NeuralNetSpec(layer_sizes=(10, 7, 1)).parameter_count(10) == 85
    assert NeuralNetSpec(layer_sizes=(10, 5, 4, 1)).parameter_count(10) == 84
    assert QclSpec(depth=3).parameter_count(10) == 90
    assert MpsSpec(bond_dim=2).parameter_count(10) == 72
    with pytest.raises(ConfigurationError):
        NeuralNetSpec(layer_sizes=(10, 7, 1)).parameter_count(4)


def test_window_validation():
    cfg = TrainConfig(epochs=1, seed=0)
    with pytest.raises(ValidationError):
        fit(LinearSpec(), np.full((30, 2), 1.5), np.zeros(30), cfg)
    with pytest.raises(UsageError):
        fit(LinearSpec(), np.zeros((0, 2)), np.zeros(0), cfg)
    bad = np.full((30, 2), 0.5)
    bad[0, 0] = np.nan
    with pytest.raises(ValidationError):
        fit(LinearSpec(), bad, np.zeros(30), cfg)


def test_loss_trace_is_full_window_loss():
    from qxs import nn_forward_batch

    x, y = _linear_window(n=64)
    cfg = TrainConfig(epochs=3, batch_size=64, seed=6)
    predictor = fit(NeuralNetSpec(layer_sizes=(4, 3, 1)), x, y, cfg)
    # With batch = window the final trace entry is the loss of the final
    # parameters over the whole window.
    final = mse(nn_forward_batch(predictor.model, x), y)
    assert predictor.loss_trace[-1] == pytest.approx(final, abs=1e-12)
