"""Tensor-chain regression tests.

The brute-force oracle materializes the full (2,)*n weight tensor and
contracts it against per-site (1, x_j) factors; everything the fast chain
contraction does must agree with that to float precision.
"""

import numpy as np
import pytest

from qxs import (
    ConfigurationError,
    MpsWeights,
    UsageError,
    init_mps,
    mps_forward,
    mps_forward_batch,
    mps_gradient,
    mps_parameter_count,
    mps_to_full_tensor,
    mps_vjp_batch,
)
from qxs.gradcheck import finite_difference_gradient
from qxs.mps import mps_from_json_dict, mps_to_json_dict


def _full_tensor_forward(weights: MpsWeights, x: np.ndarray) -> float:
    tensor = mps_to_full_tensor(weights)
    for x_j in reversed(x):
        tensor = tensor @ np.array([1.0, x_j])
    return float(tensor)


def _random_weights(n_sites, bond_dim, seed):
    return init_mps(n_sites, bond_dim, seed=seed, noise_scale=0.7)


def test_parameter_count_reference_case():
    assert mps_parameter_count(10, 2) == 72


def test_parameter_count_matches_flat_length():
    for n, m in [(2, 1), (3, 2), (5, 3), (8, 4)]:
        weights = init_mps(n, m, seed=0)
        assert weights.parameter_count == mps_parameter_count(n, m)
        assert weights.parameters_flat().shape == (weights.parameter_count,)


def test_zero_noise_init_is_constant_one():
    weights = init_mps(6, 3, seed=0, noise_scale=0.0)
    x = np.random.default_rng(0).uniform(0, 1, size=(7, 6))
    np.testing.assert_array_equal(mps_forward_batch(weights, x), np.ones(7))


def test_forward_matches_full_tensor():
    rng = np.random.default_rng(3)
    for n, m in [(2, 1), (3, 2), (4, 3), (6, 2)]:
        weights = _random_weights(n, m, seed=n * 10 + m)
        for _ in range(5):
            x = rng.uniform(-1, 1, size=n)
            assert mps_forward(weights, x) == pytest.approx(
                _full_tensor_forward(weights, x), abs=1e-12
            )


def test_batch_matches_single():
    weights = _random_weights(5, 2, seed=1)
    x = np.random.default_rng(4).uniform(0, 1, size=(6, 5))
    batch = mps_forward_batch(weights, x)
    np.testing.assert_allclose(
        batch, [mps_forward(weights, row) for row in x], atol=1e-14
    )


def test_scaling_one_site_scales_output():
    # The prediction is multilinear in the site tensors.
    weights = _random_weights(5, 3, seed=2)
    x = np.random.default_rng(5).uniform(0, 1, size=5)
    base = mps_forward(weights, x)
    for j in range(5):
        scaled = MpsWeights(
            site_tensors=[
                t * (3.0 if k == j else 1.0)
                for k, t in enumerate(weights.site_tensors)
            ]
        )
        assert mps_forward(scaled, x) == pytest.approx(3.0 * base, rel=1e-12)


def test_gauge_transform_leaves_output_unchanged():
    # Inserting G, G^-1 on a bond reparameterizes the chain without moving
    # the represented tensor.
    weights = _random_weights(6, 3, seed=7)
    rng = np.random.default_rng(8)
    gauge = rng.normal(size=(3, 3)) + 3.0 * np.eye(3)
    inv = np.linalg.inv(gauge)
    sites = [t.copy() for t in weights.site_tensors]
    bond = 2  # between site 2 and site 3
    sites[bond] = np.einsum("iab,bc->iac", sites[bond], gauge)
    sites[bond + 1] = np.einsum("ab,ibc->iac", inv, sites[bond + 1])
    transformed = MpsWeights(site_tensors=sites)
    x = rng.uniform(-1, 1, size=(10, 6))
    np.testing.assert_allclose(
        mps_forward_batch(transformed, x), mps_forward_batch(weights, x),
        atol=1e-10,
    )


def test_reversed_chain_gives_same_value():
    weights = _random_weights(5, 2, seed=9)
    reversed_sites = []
    for t in reversed(weights.site_tensors):
        reversed_sites.append(t if t.ndim == 2 else np.swapaxes(t, 1, 2))
    flipped = MpsWeights(site_tensors=reversed_sites)
    x = np.random.default_rng(10).uniform(-1, 1, size=5)
    assert mps_forward(flipped, x[::-1]) == pytest.approx(
        mps_forward(weights, x), abs=1e-12
    )


def test_gradient_matches_finite_differences():
    weights = _random_weights(4, 2, seed=11)
    x = np.random.default_rng(12).uniform(0, 1, size=4)
    grads = mps_gradient(weights, x)
    analytic = np.concatenate([g.ravel() for g in grads])

    def value(flat):
        probe = init_mps(4, 2, seed=11)
        probe.set_parameters_flat(flat)
        return mps_forward(probe, x)

    fd = finite_difference_gradient(value, weights.parameters_flat(), eps=1e-6)
    np.testing.assert_allclose(analytic, fd, atol=1e-9)


def test_gradient_shapes_match_sites():
    weights = _random_weights(5, 3, seed=13)
    grads = mps_gradient(weights, np.full(5, 0.4))
    assert [g.shape for g in grads] == [t.shape for t in weights.site_tensors]


def test_vjp_is_upstream_weighted_gradient_sum():
    weights = _random_weights(4, 2, seed=14)
    x = np.random.default_rng(15).uniform(0, 1, size=(3, 4))
    upstream = np.array([1.0, -2.0, 0.5])
    combined = mps_vjp_batch(weights, x, upstream)
    manual = np.zeros_like(combined)
    for u, row in zip(upstream, x):
        manual += u * np.concatenate(
            [g.ravel() for g in mps_gradient(weights, row)]
        )
    np.testing.assert_allclose(combined, manual, atol=1e-12)


def test_full_tensor_refuses_large_chains():
    weights = init_mps(13, 1, seed=0)
    with pytest.raises(ConfigurationError):
        mps_to_full_tensor(weights)


def test_json_round_trip_exact():
    weights = _random_weights(5, 3, seed=16)
    restored = mps_from_json_dict(mps_to_json_dict(weights))
    for a, b in zip(weights.site_tensors, restored.site_tensors):
        np.testing.assert_array_equal(a, b)


def test_flat_round_trip():
    weights = _random_weights(6, 2, seed=17)
    flat = weights.parameters_flat()
    flat[5] = 42.0
    weights.set_parameters_flat(flat)
    np.testing.assert_array_equal(weights.parameters_flat(), flat)
    with pytest.raises(UsageError):
        weights.set_parameters_flat(flat[:-1])


def test_validation_rejects_bad_shapes():
    with pytest.raises((UsageError, ConfigurationError)):
        MpsWeights(site_tensors=[np.zeros((2, 2)), np.zeros((3, 2))])
    with pytest.raises((UsageError, ConfigurationError)):
        init_mps(1, 2)


def test_feature_length_mismatch():
    weights = init_mps(4, 2, seed=0)
    with pytest.raises(UsageError):
        mps_forward(weights, np.zeros(3))
