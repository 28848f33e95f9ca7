"""Circuit model tests: encoding closed forms, parameter-shift gradients,
and a fully hand-derived single-qubit ansatz oracle."""

import numpy as np
import pytest

from qxs import (
    ConfigurationError,
    UsageError,
    ValidationError,
    encode,
    expectation_z,
    init_qcl,
    qcl_forward,
    qcl_forward_batch,
    qcl_gradient,
    qcl_vjp_batch,
    shift_rule_sign,
)
from qxs.gradcheck import finite_difference_gradient
from qxs.qcl import qcl_from_json_dict, qcl_to_json_dict


def _closed_form_model(theta_triple, tau=1e-9):
    # depth 1, one qubit; tau tiny so the entangler is the identity up to
    # O(tau) and the hand-derived formula below applies.
    model = init_qcl(n_qubits=1, depth=1, tau=tau, seed=0)
    model.theta = np.array(theta_triple, dtype=np.float64).reshape(1, 1, 3)
    return model


def test_parameter_count():
    model = init_qcl(n_qubits=10, depth=3, seed=0)
    assert model.parameter_count == 90
    assert model.parameters_flat().shape == (90,)


def test_theta_init_range_and_determinism():
    a = init_qcl(n_qubits=4, depth=2, seed=5)
    b = init_qcl(n_qubits=4, depth=2, seed=5)
    c = init_qcl(n_qubits=4, depth=2, seed=6)
    np.testing.assert_array_equal(a.theta, b.theta)
    assert not np.array_equal(a.theta, c.theta)
    assert np.all(a.theta >= 0.0) and np.all(a.theta < 2 * np.pi)


def test_encode_single_qubit_z_expectation():
    # After R_Y(asin x) the qubit's <Z> is cos(asin x) = sqrt(1 - x^2);
    # the following R_Z leaves <Z> unchanged.
    for x in (-0.9, -0.3, 0.0, 0.5, 1.0):
        state = encode(np.array([x]))
        assert expectation_z(state, 0) == pytest.approx(np.sqrt(1 - x * x),
                                                        abs=1e-12)


def test_encode_rejects_out_of_range():
    with pytest.raises(ValidationError, match="feature 1"):
        encode(np.array([0.0, 1.5, 0.2]))


def test_encode_rejects_nan():
    with pytest.raises(ValidationError):
        encode(np.array([np.nan]))


def test_forward_single_matches_batch():
    model = init_qcl(n_qubits=3, depth=2, seed=1)
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, size=(6, 3))
    batch = qcl_forward_batch(model, x)
    singles = [qcl_forward(model, row) for row in x]
    np.testing.assert_allclose(batch, singles, atol=1e-14)


def test_forward_is_bounded():
    model = init_qcl(n_qubits=4, depth=3, seed=3)
    x = np.random.default_rng(4).uniform(-1, 1, size=(20, 4))
    values = qcl_forward_batch(model, x)
    assert np.all(values >= -1.0) and np.all(values <= 1.0)


def test_single_qubit_ansatz_closed_form():
    # x = 0 encodes (up to a global phase) back to |0>.  With the entangler
    # ~ identity the circuit is R_X(t1) R_Z(t2) R_X(t3) |0> and
    #   <Z> = cos(t1) cos(t3) - sin(t1) sin(t3) cos(t2),
    # derived by direct 2x2 algebra.
    rng = np.random.default_rng(8)
    for _ in range(10):
        t1, t2, t3 = rng.uniform(0, 2 * np.pi, size=3)
        model = _closed_form_model([t1, t2, t3])
        expected = np.cos(t1) * np.cos(t3) - np.sin(t1) * np.sin(t3) * np.cos(t2)
        assert qcl_forward(model, np.array([0.0])) == pytest.approx(
            expected, abs=1e-6
        )


def test_single_qubit_gradient_closed_form():
    t1, t2, t3 = 0.4, 1.1, 2.3
    model = _closed_form_model([t1, t2, t3])
    grad = qcl_gradient(model, np.array([0.0]))
    expected = np.array([
        -np.sin(t1) * np.cos(t3) - np.cos(t1) * np.sin(t3) * np.cos(t2),
        np.sin(t1) * np.sin(t3) * np.sin(t2),
        -np.cos(t1) * np.sin(t3) - np.sin(t1) * np.cos(t3) * np.cos(t2),
    ])
    np.testing.assert_allclose(grad, expected, atol=1e-6)


def test_shift_rule_sign_is_positive():
    assert shift_rule_sign() == 1


def test_gradient_matches_finite_differences():
    model = init_qcl(n_qubits=2, depth=1, seed=7)
    x = np.array([0.25, -0.6])
    analytic = qcl_gradient(model, x)

    def value(flat):
        probe = init_qcl(n_qubits=2, depth=1, seed=7)
        probe.set_parameters_flat(flat)
        return qcl_forward(probe, x)

    fd = finite_difference_gradient(value, model.parameters_flat(), eps=1e-4)
    np.testing.assert_allclose(analytic, fd, atol=1e-7)


def test_vjp_is_upstream_weighted_gradient_sum():
    model = init_qcl(n_qubits=2, depth=2, seed=9)
    x = np.array([[0.1, 0.9], [-0.4, 0.2], [0.7, -0.7]])
    upstream = np.array([0.5, -1.5, 2.0])
    combined = qcl_vjp_batch(model, x, upstream)
    manual = sum(u * qcl_gradient(model, row) for u, row in zip(upstream, x))
    np.testing.assert_allclose(combined, manual, atol=1e-12)


def test_set_parameters_flat_round_trip():
    model = init_qcl(n_qubits=3, depth=2, seed=0)
    flat = model.parameters_flat()
    flat[4] = 0.123
    model.set_parameters_flat(flat)
    np.testing.assert_array_equal(model.parameters_flat(), flat)
    with pytest.raises(UsageError):
        model.set_parameters_flat(flat[:-1])


def test_json_round_trip_preserves_predictions():
    model = init_qcl(n_qubits=3, depth=2, seed=13)
    restored = qcl_from_json_dict(qcl_to_json_dict(model))
    x = np.random.default_rng(1).uniform(-1, 1, size=(5, 3))
    np.testing.assert_array_equal(
        qcl_forward_batch(model, x), qcl_forward_batch(restored, x)
    )


def test_init_validation():
    with pytest.raises(ConfigurationError):
        init_qcl(n_qubits=0, depth=1)
    with pytest.raises(ConfigurationError):
        init_qcl(n_qubits=2, depth=0)


def test_feature_count_mismatch():
    model = init_qcl(n_qubits=3, depth=1, seed=0)
    with pytest.raises(UsageError):
        qcl_forward(model, np.array([0.1, 0.2]))
