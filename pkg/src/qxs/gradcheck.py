"""Finite-difference checks for every analytic gradient path.

Each check builds seeded random fixtures, evaluates the model's analytic
gradient (parameter shift for the circuit, environment contraction for the
chain, backprop for the network) and compares it against central finite
differences built from forward evaluations only, so the oracle never shares
code with the path it checks.  Returns the maximum absolute deviation across
fixtures; the CLI and the acceptance suite compare it to the documented
tolerances.
"""

from __future__ import annotations

import numpy as np

from . import classical, mps, qcl
from .errors import UsageError

__all__ = [
    "finite_difference_gradient",
    "qcl_gradient_check",
    "mps_gradient_check",
    "nn_gradient_check",
    "TOLERANCES",
]

# Documented pass thresholds per model family.
TOLERANCES = {"qcl": 1e-6, "tn": 1e-8, "nn": 1e-6}


def finite_difference_gradient(f, params: np.ndarray, eps: float) -> np.ndarray:
    """Central differences (f(p+eps) - f(p-eps)) / (2 eps) per coordinate."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1:
        raise UsageError(f"params must be flat, got shape {params.shape}")
    grad = np.empty_like(params)
    for i in range(params.size):
        up = params.copy()
        up[i] += eps
        down = params.copy()
        down[i] -= eps
        grad[i] = (f(up) - f(down)) / (2.0 * eps)
    return grad


def qcl_gradient_check(n_qubits: int = 4, depth: int = 2, seed: int = 0,
                       fixtures: int = 10, eps: float = 1e-4) -> float:
    """Max |parameter-shift - finite-difference| over random (theta, x)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(fixtures):
        model = qcl.init_qcl(n_qubits, depth, seed=seed + k)
        x = rng.uniform(-1.0, 1.0, size=n_qubits)
        analytic = qcl.qcl_gradient(model, x)

        def forward(flat):
            probe = qcl.QclModel(
                n_qubits=model.n_qubits, depth=model.depth,
                theta=flat.reshape(model.theta.shape),
                hamiltonian=model.hamiltonian, unitary=model.unitary,
            )
            return qcl.qcl_forward(probe, x)

        fd = finite_difference_gradient(forward, model.parameters_flat(), eps)
        worst = max(worst, float(np.max(np.abs(analytic - fd))))
    return worst


def mps_gradient_check(n_sites: int = 5, bond_dim: int = 2, seed: int = 0,
                       fixtures: int = 10, eps: float = 1e-6) -> float:
    """Max |environment gradient - finite difference| over random fixtures."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(fixtures):
        weights = mps.init_mps(n_sites, bond_dim, seed=seed + k,
                               noise_scale=0.3)
        x = rng.uniform(0.0, 1.0, size=n_sites)
        analytic = np.concatenate([g.ravel() for g in
                                   mps.mps_gradient(weights, x)])

        def forward(flat):
            probe = mps.mps_from_json_dict(mps.mps_to_json_dict(weights))
            probe.set_parameters_flat(flat)
            return mps.mps_forward(probe, x)

        fd = finite_difference_gradient(forward, weights.parameters_flat(), eps)
        worst = max(worst, float(np.max(np.abs(analytic - fd))))
    return worst


def nn_gradient_check(layer_sizes=(6, 4, 1), seed: int = 0, fixtures: int = 10,
                      eps: float = 1e-5, kink_margin: float = 1e-3) -> float:
    """Max |backprop - finite difference| on fixtures away from ReLU kinks.

    Inputs whose pre-activations land within ``kink_margin`` of zero are
    re-sampled: central differences straddle the kink there and measure
    nothing about the gradient code.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(fixtures):
        net = classical.make_nn(layer_sizes, seed=seed + k)
        x = None
        for _ in range(200):
            candidate = rng.uniform(-1.0, 1.0, size=layer_sizes[0])
            _, pre = classical._forward_pass(net, candidate[None, :])
            if all(np.min(np.abs(z)) > kink_margin for z in pre[:-1]):
                x = candidate
                break
        if x is None:
            raise UsageError(
                "could not sample an input clear of every ReLU kink; "
                "widen kink_margin"
            )
        grads_w, grads_b = classical.nn_gradient(net, x, upstream=1.0)
        analytic = np.concatenate(
            [np.concatenate([w.ravel(), b.ravel()])
             for w, b in zip(grads_w, grads_b)]
        )

        def forward(flat):
            probe = classical.nn_from_json_dict(classical.nn_to_json_dict(net))
            probe.set_parameters_flat(flat)
            return classical.nn_forward(probe, x)

        fd = finite_difference_gradient(forward, net.parameters_flat(), eps)
        worst = max(worst, float(np.max(np.abs(analytic - fd))))
    return worst
