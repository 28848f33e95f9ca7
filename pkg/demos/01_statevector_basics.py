"""Walk through the dense statevector simulator.

Zero state, single-qubit rotations, a random Ising evolution, and the
invariants the library guarantees (unit norm, unitarity, and the one-qubit
closed form for <Z> after evolving under a pure transverse field).
"""

import numpy as np

from qxs import (
    apply_rotation,
    apply_unitary,
    expectation_z,
    exponentiate_hamiltonian,
    init_zero_state,
    make_random_hamiltonian,
)

# --- rotations on |00> -----------------------------------------------------

state = init_zero_state(2)
print("initial |00> amplitudes:", np.round(state.amplitudes, 3))

# A half-turn about Y flips qubit 0 (up to the convention's global phase).
flipped = apply_rotation(state, "Y", 0, np.pi)
print("after R_Y(pi) on qubit 0:", np.round(flipped.amplitudes, 3))
print("  <Z_0> =", round(expectation_z(flipped, 0), 6))
print("  <Z_1> =", round(expectation_z(flipped, 1), 6))

# A quarter turn leaves the qubit halfway: <Z> = cos(pi/2) = 0.
half = apply_rotation(state, "Y", 0, np.pi / 2)
print("after R_Y(pi/2):  <Z_0> =", round(expectation_z(half, 0), 6))

# --- random Ising evolution ------------------------------------------------

# H = sum a_j X_j + sum_{j>k} J_jk Z_j Z_k with coefficients drawn U[-1, 1].
spec = make_random_hamiltonian(4, tau=1.0, seed=7)
print("\n4-qubit random Hamiltonian, fields:", np.round(spec.coefficients_a, 3))
u = exponentiate_hamiltonian(spec)

gram = u.entries.conj().T @ u.entries
print("unitarity |U^H U - I| max:", f"{np.max(np.abs(gram - np.eye(16))):.2e}")

evolved = apply_unitary(init_zero_state(4), u)
print("norm after evolution:", f"{np.linalg.norm(evolved.amplitudes):.15f}")
print("<Z_j> per qubit:", np.round([expectation_z(evolved, q) for q in range(4)], 4))

# --- one-qubit closed form -------------------------------------------------

# With a single qubit there is no coupling term, so |0> precesses under
# a_1 X alone and <Z>(tau) = cos(2 a_1 tau) exactly.
print("\nsingle-qubit closed form check:")
for tau in (0.5, 1.0, 2.0):
    s1 = make_random_hamiltonian(1, tau=tau, seed=3)
    z = expectation_z(apply_unitary(init_zero_state(1),
                                    exponentiate_hamiltonian(s1)), 0)
    expected = np.cos(2.0 * s1.coefficients_a[0] * tau)
    print(f"  tau={tau}: <Z> = {z:+.12f}, cos(2 a tau) = {expected:+.12f}, "
          f"diff {abs(z - expected):.1e}")
