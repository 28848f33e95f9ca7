"""Dense statevector simulation for small qubit registers.

Conventions, fixed here and relied on everywhere else:

* Basis index bit ``q`` is qubit ``q``; qubit 0 is the least significant bit.
* Rotations use the positive-exponent form ``R_P(phi) = exp(+i * phi * P / 2)``,
  so e.g. ``R_Y(pi)`` maps ``|0> -> -|1>``.
* States are immutable from the caller's perspective: every operation returns
  a fresh :class:`StateVector` and never writes through a shared array.

No measurement sampling, no noise channels, no gate decompositions: exact
amplitudes only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError, UsageError

__all__ = [
    "MAX_QUBITS",
    "StateVector",
    "DenseUnitary",
    "RandomHamiltonianSpec",
    "init_zero_state",
    "apply_rotation",
    "apply_unitary",
    "expectation_z",
    "make_random_hamiltonian",
    "hamiltonian_matrix",
    "exponentiate_hamiltonian",
]

# Dense 2^n amplitudes: past 16 qubits the simulator (and the dense
# exponentials below) stop fitting a workstation memory budget.
MAX_QUBITS = 16

_NORM_TOL = 1e-12
_UNITARY_TOL = 1e-10
_AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class StateVector:
    """A pure state of ``n_qubits`` qubits as 2^n complex amplitudes.

    The amplitude array is owned by the instance; treat it as read-only.
    """

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ConfigurationError(
                f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}"
            )
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.n_qubits,):
            raise UsageError(
                f"amplitude vector has shape {amps.shape}, "
                f"expected ({1 << self.n_qubits},)"
            )
        norm_sq = float(np.sum(np.abs(amps) ** 2))
        if abs(norm_sq - 1.0) > 1e-9:
            raise UsageError(f"state is not normalized: |psi|^2 = {norm_sq!r}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dimension(self) -> int:
        return 1 << self.n_qubits

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class DenseUnitary:
    """A dense unitary matrix, checked against U^dagger U = I on construction."""

    dimension: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.complex128)
        if entries.shape != (self.dimension, self.dimension):
            raise UsageError(
                f"entries have shape {entries.shape}, expected square of "
                f"dimension {self.dimension}"
            )
        defect = np.max(np.abs(entries.conj().T @ entries - np.eye(self.dimension)))
        if defect > _UNITARY_TOL:
            raise NumericalError(
                f"matrix is not unitary: max |U^H U - I| = {float(defect):.3e}"
            )
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class RandomHamiltonianSpec:
    """Coefficients of a random transverse-field Ising generator.

    ``H = sum_j a_j X_j + sum_{j>k} J_{jk} Z_j Z_k`` with all coefficients in
    [-1, 1].  Couplings are stored flat in pair order (j, k) for
    j = 1..n-1, k = 0..j-1.  ``tau`` is the evolution time of
    ``exp(-i H tau)`` and ``seed`` reproduces the draw.
    """

    n_qubits: int
    coefficients_a: np.ndarray
    couplings_j: np.ndarray
    tau: float
    seed: int

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ConfigurationError(
                f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}"
            )
        if not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")
        a = np.asarray(self.coefficients_a, dtype=np.float64)
        j = np.asarray(self.couplings_j, dtype=np.float64)
        n = self.n_qubits
        if a.shape != (n,):
            raise UsageError(f"coefficients_a must have shape ({n},), got {a.shape}")
        if j.shape != (n * (n - 1) // 2,):
            raise UsageError(
                f"couplings_j must have shape ({n * (n - 1) // 2},), got {j.shape}"
            )
        if np.max(np.abs(a), initial=0.0) > 1.0 or np.max(np.abs(j), initial=0.0) > 1.0:
            raise ConfigurationError("Hamiltonian coefficients must lie in [-1, 1]")
        object.__setattr__(self, "coefficients_a", a)
        object.__setattr__(self, "couplings_j", j)


def init_zero_state(n_qubits: int) -> StateVector:
    """Return |0...0> on ``n_qubits`` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(
            f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}"
        )
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits=int(n_qubits), amplitudes=amps)


def _check_qubit(n_qubits: int, qubit: int) -> None:
    if not 0 <= qubit < n_qubits:
        raise UsageError(f"qubit index {qubit} out of range for {n_qubits} qubits")


def rotate_batch_inplace(amps: np.ndarray, n_qubits: int, axis: str, qubit: int,
                         angle) -> None:
    """Apply ``exp(+i * angle * P_qubit / 2)`` to a (batch, 2^n) array in place.

    ``angle`` may be a scalar (shared across the batch) or a length-batch
    array (one angle per row).  This is the single rotation kernel the public
    ops and the batched model evaluators share.
    """
    axis = axis.upper() if isinstance(axis, str) else axis
    if axis not in _AXES:
        raise UsageError(f"axis must be one of {_AXES}, got {axis!r}")
    _check_qubit(n_qubits, qubit)
    batch = amps.shape[0]
    angle = np.asarray(angle, dtype=np.float64)
    half = angle / 2.0
    if angle.ndim == 0:
        c, s = float(np.cos(half)), float(np.sin(half))
    elif angle.shape == (batch,):
        # One angle per row, broadcast over the (batch, high, 2, low) view.
        c = np.cos(half)[:, None, None]
        s = np.sin(half)[:, None, None]
    else:
        raise UsageError(
            f"angle must be scalar or shape ({batch},), got shape {angle.shape}"
        )
    view = amps.reshape(batch, 1 << (n_qubits - qubit - 1), 2, 1 << qubit)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    if axis == "Z":
        a0 *= c + 1j * s
        a1 *= c - 1j * s
        return
    old0 = a0.copy()
    if axis == "X":
        a0 *= c
        a0 += (1j * s) * a1
        a1 *= c
        a1 += (1j * s) * old0
    else:  # Y
        a0 *= c
        a0 += s * a1
        a1 *= c
        a1 -= s * old0


def apply_rotation(state: StateVector, axis: str, qubit: int,
                   angle: float) -> StateVector:
    """Return ``exp(+i * angle * P_qubit / 2) |state>`` for P in {X, Y, Z}."""
    if not np.isfinite(angle):
        raise UsageError(f"rotation angle must be finite, got {angle!r}")
    amps = state.amplitudes.copy()[None, :]
    rotate_batch_inplace(amps, state.n_qubits, axis, qubit, float(angle))
    return StateVector(n_qubits=state.n_qubits, amplitudes=amps[0])


def apply_unitary(state: StateVector, unitary: DenseUnitary) -> StateVector:
    """Return ``U |state>``."""
    if unitary.dimension != state.dimension:
        raise UsageError(
            f"unitary dimension {unitary.dimension} does not match state "
            f"dimension {state.dimension}"
        )
    return StateVector(
        n_qubits=state.n_qubits, amplitudes=unitary.entries @ state.amplitudes
    )


def z_signs(n_qubits: int, qubit: int) -> np.ndarray:
    """Eigenvalues of Z on ``qubit`` along the computational basis (+1/-1)."""
    _check_qubit(n_qubits, qubit)
    idx = np.arange(1 << n_qubits)
    return 1.0 - 2.0 * ((idx >> qubit) & 1)


def expectation_z(state: StateVector, qubit: int) -> float:
    """Return <Z_qubit>, clipped to [-1, 1] against float round-off."""
    signs = z_signs(state.n_qubits, qubit)
    value = float(np.sum((np.abs(state.amplitudes) ** 2) * signs))
    return min(1.0, max(-1.0, value))


def make_random_hamiltonian(n_qubits: int, tau: float,
                            seed: int) -> RandomHamiltonianSpec:
    """Draw field and coupling coefficients i.i.d. uniform from [-1, 1]."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(
            f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}"
        )
    if not tau > 0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, size=n_qubits)
    j = rng.uniform(-1.0, 1.0, size=n_qubits * (n_qubits - 1) // 2)
    return RandomHamiltonianSpec(
        n_qubits=n_qubits, coefficients_a=a, couplings_j=j, tau=float(tau),
        seed=int(seed),
    )


def hamiltonian_matrix(spec: RandomHamiltonianSpec) -> np.ndarray:
    """Materialize H as a real symmetric (2^n, 2^n) matrix.

    X_j is real and off-diagonal (bit flip on qubit j); Z_j Z_k is a real
    diagonal, so the whole generator is real symmetric in the computational
    basis.
    """
    n = spec.n_qubits
    dim = 1 << n
    h = np.zeros((dim, dim))
    idx = np.arange(dim)
    for j in range(n):
        h[idx ^ (1 << j), idx] += spec.coefficients_a[j]
    diag = np.zeros(dim)
    pair = 0
    for j in range(1, n):
        zj = 1.0 - 2.0 * ((idx >> j) & 1)
        for k in range(j):
            zk = 1.0 - 2.0 * ((idx >> k) & 1)
            diag += spec.couplings_j[pair] * zj * zk
            pair += 1
    h[idx, idx] += diag
    return h


def exponentiate_hamiltonian(spec: RandomHamiltonianSpec) -> DenseUnitary:
    """Return ``exp(-i * H * tau)`` via real-symmetric eigendecomposition.

    H is real symmetric in the computational basis, so
    ``U = V exp(-i * w * tau) V^T`` with (w, V) from ``eigh``.  Callers cache
    the result; for a fixed model this runs once.
    """
    h = hamiltonian_matrix(spec)
    w, v = np.linalg.eigh(h)
    phases = np.exp(-1j * w * spec.tau)
    entries = (v * phases) @ v.T
    return DenseUnitary(dimension=h.shape[0], entries=entries)
