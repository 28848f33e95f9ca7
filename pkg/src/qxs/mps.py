"""Matrix-product-state regression with open boundaries.

The regression weight tensor ``W`` over n binary legs is factored into site
tensors: boundary sites have shape (2, m), interior sites (2, m, m), with m
the bond dimension.  Each feature enters through the local map
``phi(x_j) = (1, x_j)``, so the prediction is

    F(x) = v_1 M_2 M_3 ... M_{n-1} v_n,   M_j = A_j[0] + x_j * A_j[1],

a left-to-right chain of m x m products costing O(n * m^2) per sample instead
of the 2^n cost of the full tensor.  ``mps_to_full_tensor`` materializes W for
small n so the contraction can be cross-checked against the brute-force route.

The output is multilinear in the site tensors, which gives a cheap exact
gradient: the derivative w.r.t. site j is the outer product of the prefix
chain, phi(x_j) and the suffix chain at that site.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UsageError

__all__ = [
    "MpsWeights",
    "init_mps",
    "mps_parameter_count",
    "mps_forward",
    "mps_forward_batch",
    "mps_gradient",
    "mps_vjp_batch",
    "mps_to_full_tensor",
    "mps_to_json_dict",
    "mps_from_json_dict",
]

# Full-tensor materialization is the oracle route; past 12 legs it stops
# being cheap enough to justify.
MAX_FULL_TENSOR_SITES = 12

DEFAULT_NOISE_SCALE = 1e-2


@dataclass
class MpsWeights:
    """Site tensors of an open-boundary chain: (2, m), (2, m, m)..., (2, m)."""

    site_tensors: list

    def __post_init__(self):
        sites = [np.asarray(t, dtype=np.float64) for t in self.site_tensors]
        if len(sites) < 2:
            raise ConfigurationError(
                f"need at least 2 sites, got {len(sites)}"
            )
        m = sites[0].shape[-1]
        if sites[0].shape != (2, m) or sites[-1].shape != (2, m):
            raise UsageError(
                "boundary tensors must have shape (2, m); got "
                f"{sites[0].shape} and {sites[-1].shape}"
            )
        for pos, t in enumerate(sites[1:-1], start=1):
            if t.shape != (2, m, m):
                raise UsageError(
                    f"interior tensor {pos} must have shape (2, {m}, {m}), "
                    f"got {t.shape}"
                )
        self.site_tensors = sites

    @property
    def n_sites(self) -> int:
        return len(self.site_tensors)

    @property
    def bond_dim(self) -> int:
        return self.site_tensors[0].shape[-1]

    @property
    def parameter_count(self) -> int:
        return sum(t.size for t in self.site_tensors)

    def parameters_flat(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.site_tensors])

    def set_parameters_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.parameter_count,):
            raise UsageError(
                f"expected {self.parameter_count} parameters, got {flat.shape}"
            )
        offset = 0
        new_sites = []
        for t in self.site_tensors:
            new_sites.append(flat[offset:offset + t.size].reshape(t.shape).copy())
            offset += t.size
        self.site_tensors = new_sites


def mps_parameter_count(n_sites: int, bond_dim: int) -> int:
    """2*(2m) boundary entries plus (n-2)*(2m^2) interior entries."""
    if n_sites < 2:
        raise ConfigurationError(f"need at least 2 sites, got {n_sites}")
    return 2 * (2 * bond_dim) + (n_sites - 2) * (2 * bond_dim * bond_dim)


def init_mps(n_sites: int, bond_dim: int, seed: int = 0,
             noise_scale: float = DEFAULT_NOISE_SCALE) -> MpsWeights:
    """Near-product initialization with O(1) outputs at any chain length.

    The physical-index-0 slice of each site is an identity-like bond map
    (first basis vector at the boundaries, I_m inside), so the x = 0 output is
    exactly 1; the physical-index-1 slices are seeded Gaussian noise of scale
    ``noise_scale``, keeping every chain product close to that identity
    instead of exponentially large or small in n.
    """
    if n_sites < 2:
        raise ConfigurationError(f"need at least 2 sites, got {n_sites}")
    if bond_dim < 1:
        raise ConfigurationError(f"bond_dim must be >= 1, got {bond_dim}")
    if not noise_scale >= 0:
        raise ConfigurationError(f"noise_scale must be >= 0, got {noise_scale}")
    rng = np.random.default_rng(seed)
    sites = []
    for pos in range(n_sites):
        if pos in (0, n_sites - 1):
            t = np.zeros((2, bond_dim))
            t[0, 0] = 1.0
            t[1] = noise_scale * rng.standard_normal(bond_dim)
        else:
            t = np.zeros((2, bond_dim, bond_dim))
            t[0] = np.eye(bond_dim)
            t[1] = noise_scale * rng.standard_normal((bond_dim, bond_dim))
        sites.append(t)
    return MpsWeights(site_tensors=sites)


def _validate_rows(weights: MpsWeights, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != weights.n_sites:
        raise UsageError(
            f"expected {weights.n_sites} features per row, got {x.shape[1]}"
        )
    if not np.all(np.isfinite(x)):
        raise UsageError("features must be finite")
    return x


def mps_forward_batch(weights: MpsWeights, x: np.ndarray) -> np.ndarray:
    """Contract the chain left to right for each row; returns shape (batch,)."""
    x = _validate_rows(weights, x)
    sites = weights.site_tensors
    n = weights.n_sites
    # v: (batch, m) running left environment.
    v = sites[0][0][None, :] + x[:, 0, None] * sites[0][1][None, :]
    for j in range(1, n - 1):
        mats = sites[j][0][None] + x[:, j, None, None] * sites[j][1][None]
        v = np.einsum("ba,bac->bc", v, mats)
    u = sites[n - 1][0][None, :] + x[:, n - 1, None] * sites[n - 1][1][None, :]
    return np.einsum("ba,ba->b", v, u)


def mps_forward(weights: MpsWeights, x) -> float:
    """Predict for one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise UsageError(f"expected a 1-D feature vector, got shape {x.shape}")
    return float(mps_forward_batch(weights, x[None, :])[0])


def _environments(weights: MpsWeights, x: np.ndarray):
    """Per-sample prefix and suffix chains around every site.

    prefix[j] is the product of everything left of site j (shape (batch, m),
    ones-free: for j = 0 it is None), suffix[j] everything right of it.
    """
    sites = weights.site_tensors
    n = weights.n_sites
    batch = x.shape[0]
    mats = [None] * n
    for j in range(1, n - 1):
        mats[j] = sites[j][0][None] + x[:, j, None, None] * sites[j][1][None]
    prefix = [None] * n
    prefix[1] = sites[0][0][None, :] + x[:, 0, None] * sites[0][1][None, :]
    for j in range(2, n):
        prefix[j] = np.einsum("ba,bac->bc", prefix[j - 1], mats[j - 1])
    suffix = [None] * n
    suffix[n - 2] = (sites[n - 1][0][None, :]
                     + x[:, n - 1, None] * sites[n - 1][1][None, :])
    for j in range(n - 3, -1, -1):
        suffix[j] = np.einsum("bac,bc->ba", mats[j + 1], suffix[j + 1])
    return prefix, suffix


def mps_gradient(weights: MpsWeights, x) -> list:
    """Exact gradient of the prediction, shaped like the site tensors."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise UsageError(f"expected a 1-D feature vector, got shape {x.shape}")
    x2 = _validate_rows(weights, x[None, :])
    prefix, suffix = _environments(weights, x2)
    n = weights.n_sites
    phi = np.stack([np.ones_like(x), x])  # (2, n)
    grads = []
    for j in range(n):
        if j == 0:
            grads.append(np.outer(phi[:, 0], suffix[0][0]))
        elif j == n - 1:
            grads.append(np.outer(phi[:, n - 1], prefix[n - 1][0]))
        else:
            grads.append(np.einsum("i,a,c->iac", phi[:, j], prefix[j][0],
                                   suffix[j][0]))
    return grads


def mps_vjp_batch(weights: MpsWeights, x: np.ndarray,
                  upstream: np.ndarray) -> np.ndarray:
    """Return ``sum_i upstream[i] * dF(x_i)/dW`` as one flat vector."""
    x = _validate_rows(weights, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (x.shape[0],):
        raise UsageError(
            f"upstream must have shape ({x.shape[0]},), got {upstream.shape}"
        )
    prefix, suffix = _environments(weights, x)
    n = weights.n_sites
    phi = np.stack([np.ones(x.shape[0]), x[:, 0]], axis=1)
    pieces = [np.einsum("b,bi,ba->ia", upstream, phi, suffix[0]).ravel()]
    for j in range(1, n - 1):
        phi = np.stack([np.ones(x.shape[0]), x[:, j]], axis=1)
        pieces.append(
            np.einsum("b,bi,ba,bc->iac", upstream, phi, prefix[j],
                      suffix[j]).ravel()
        )
    phi = np.stack([np.ones(x.shape[0]), x[:, n - 1]], axis=1)
    pieces.append(np.einsum("b,bi,ba->ia", upstream, phi, prefix[n - 1]).ravel())
    return np.concatenate(pieces)


def mps_to_full_tensor(weights: MpsWeights) -> np.ndarray:
    """Materialize the full weight tensor, shape (2,) * n_sites.

    Brute-force oracle for the chain contraction; refuses when 2^n stops
    being small.
    """
    n = weights.n_sites
    if n > MAX_FULL_TENSOR_SITES:
        raise ConfigurationError(
            f"refusing to materialize 2^{n} entries "
            f"(limit n <= {MAX_FULL_TENSOR_SITES})"
        )
    sites = weights.site_tensors
    # Running tensor with legs (i_1 ... i_k, bond).
    t = sites[0]
    for j in range(1, n - 1):
        t = np.einsum("...a,iab->...ib", t, sites[j])
    t = np.einsum("...a,ia->...i", t, sites[n - 1])
    return t


def mps_to_json_dict(weights: MpsWeights) -> dict:
    return {
        "kind": "mps",
        "n_sites": weights.n_sites,
        "bond_dim": weights.bond_dim,
        "site_tensors": [t.ravel().tolist() for t in weights.site_tensors],
    }


def mps_from_json_dict(doc: dict) -> MpsWeights:
    if doc.get("kind") != "mps":
        raise UsageError(f"not an mps document: kind={doc.get('kind')!r}")
    n = int(doc["n_sites"])
    m = int(doc["bond_dim"])
    sites = []
    for pos, flat in enumerate(doc["site_tensors"]):
        shape = (2, m) if pos in (0, n - 1) else (2, m, m)
        sites.append(np.asarray(flat, dtype=np.float64).reshape(shape))
    return MpsWeights(site_tensors=sites)
