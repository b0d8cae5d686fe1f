"""Shared fixtures and independent dense oracles for the test suite.

The oracles here are deliberately written from scratch (explicit Kronecker
products, spectral exponentials) so they share no code with the package's
fast diagonal-phase kernels.
"""

import numpy as np
import pytest

from fklab.lattice import InputSpec, InputType, build_lattice


def brute_force_edges(rows, cols):
    """Enumerate nearest-neighbor pairs by scanning all cell coordinates."""
    def idx(r, c):
        return r * cols + c

    found = set()
    for r1 in range(rows):
        for c1 in range(cols):
            for r2 in range(rows):
                for c2 in range(cols):
                    if abs(r1 - r2) + abs(c1 - c2) == 1:
                        pair = tuple(sorted((idx(r1, c1), idx(r2, c2))))
                        found.add(pair)
    return found


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_chain(single_ops):
    """Tensor product with single_ops[k] on qubit k (bit k of the index)."""
    out = np.array([[1.0 + 0.0j]])
    for op in single_ops:
        out = np.kron(op, out)
    return out


def dense_pauli_on(n, ops_by_qubit):
    """n-qubit operator with the given single-qubit ops, identity elsewhere."""
    return kron_chain([ops_by_qubit.get(k, PAULI["I"]) for k in range(n)])


def dense_coupling_hamiltonian(lattice):
    """sum over edges of (pi/4) Z_i Z_j as a dense matrix."""
    n = lattice.num_qubits
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    for i, j in lattice.edges:
        h += (np.pi / 4) * dense_pauli_on(n, {i: PAULI["Z"], j: PAULI["Z"]})
    return h


def spectral_expm(h, t=1.0):
    """exp(-i t h) for Hermitian h."""
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * t * evals)) @ evecs.conj().T


def dense_hadamard_all(n):
    """H tensored n times, built from the explicit 2x2 matrix."""
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    return kron_chain([h] * n)


def single_input_vector(kind):
    """The two allowed input states written out from their closed forms."""
    if kind is InputType.X_TYPE:
        return np.array([(1 + 1j) / 2, (1 - 1j) / 2])
    return np.array([(1 + 1j) / 2, np.exp(-1j * np.pi / 4) * (1 - 1j) / 2])


def dense_input_vector(spec):
    amps = np.array([1.0 + 0.0j])
    for kind in spec.choices:
        amps = np.kron(single_input_vector(kind), amps)
    return amps


def dense_history_vector(lattice, spec, theta=0.0):
    """(|0>|phi> + e^{i theta}|1>U|phi>)/sqrt(2) with the clock at the top bit."""
    phi = dense_input_vector(spec)
    u = spectral_expm(dense_coupling_hamiltonian(lattice))
    return np.concatenate([phi, np.exp(1j * theta) * (u @ phi)]) / np.sqrt(2)


def random_state_vector(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def lattice_2x2():
    return build_lattice(2, 2)


@pytest.fixture
def xx_input():
    return InputSpec(choices=(InputType.X_TYPE, InputType.X_TYPE))


def small_lattices(max_qubits=6):
    """All lattice shapes with at most `max_qubits` cells (and at least one edge)."""
    shapes = []
    for rows in range(1, max_qubits + 1):
        for cols in range(1, max_qubits + 1):
            if 2 <= rows * cols <= max_qubits:
                shapes.append((rows, cols))
    return shapes
