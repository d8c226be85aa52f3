"""Numeric kernels for statevector and unitary manipulation.

Two deliberately different gate-application algorithms live here: a
matrix-free tensordot kernel used by the dense statevector backend, and a
strided block kernel that updates explicit matrices row-wise, used by the
unitary-accumulation backend. Their agreement is part of the test oracle,
so they must not share code paths.

Statevector basis ordering: qubit 0 is the least significant bit of the
basis index. Gate matrices follow the catalog convention (argument i of an
instruction is bit i of the gate-local index).
"""

from __future__ import annotations

import numpy as np


def zero_state(n_qubits: int) -> np.ndarray:
    state = np.zeros(2**n_qubits, dtype=complex)
    state[0] = 1.0
    return state


def apply_gate_tensordot(state: np.ndarray, mat: np.ndarray, qubits: tuple[int, ...],
                         n_qubits: int) -> np.ndarray:
    """Matrix-free application of a k-qubit gate to a statevector."""
    k = len(qubits)
    tensor = state.reshape([2] * n_qubits)
    gate = mat.reshape([2] * (2 * k))
    # gate input axis for argument i is 2k-1-i; state axis for qubit q is n-1-q
    in_axes = [2 * k - 1 - i for i in range(k)]
    state_axes = [n_qubits - 1 - q for q in qubits]
    out = np.tensordot(gate, tensor, axes=(in_axes, state_axes))
    # result axes 0..k-1 are gate outputs for arguments k-1..0
    dest = [n_qubits - 1 - qubits[k - 1 - j] for j in range(k)]
    return np.moveaxis(out, range(k), dest).reshape(-1)


def apply_gate_rows(matrix: np.ndarray, mat: np.ndarray, qubits: tuple[int, ...],
                    n_qubits: int) -> np.ndarray:
    """Apply a k-qubit gate to the row index of an explicit matrix, in place.

    `matrix` has shape (2**n_qubits, m) for any column count m. Works by
    slicing the row index into 2**k strided blocks and recombining them
    with the gate's coefficients.
    """
    k = len(qubits)
    view = matrix.reshape([2] * n_qubits + [matrix.shape[-1]])
    axes = [n_qubits - 1 - q for q in qubits]

    def block(bits: int):
        idx: list = [slice(None)] * (n_qubits + 1)
        for i in range(k):
            idx[axes[i]] = (bits >> i) & 1
        return tuple(idx)

    inputs = [view[block(j)].copy() for j in range(2**k)]
    for i in range(2**k):
        acc = mat[i, 0] * inputs[0]
        for j in range(1, 2**k):
            coeff = mat[i, j]
            if coeff != 0:
                acc += coeff * inputs[j]
        view[block(i)] = acc
    return matrix


def embed_gate(mat: np.ndarray, qubits: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of a gate acting on the given qubits."""
    full = np.eye(2**n_qubits, dtype=complex)
    return apply_gate_rows(full, mat, qubits, n_qubits)


def statevector_norm_error(state: np.ndarray) -> float:
    return abs(float(np.vdot(state, state).real) - 1.0)


def _aligned_max_diff(a: np.ndarray, b: np.ndarray, overlap: complex) -> float:
    if abs(overlap) == 0:
        return float(np.abs(a - b).max())
    phase = overlap / abs(overlap)
    return float(np.abs(a - phase * b).max())


def equal_up_to_global_phase(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """True when max-entry distance of a and e^{i phi} b is below tol."""
    if a.shape != b.shape:
        return False
    overlap = np.vdot(b.reshape(-1), a.reshape(-1))
    return _aligned_max_diff(a, b, overlap) < tol


def matrices_equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """True when a = e^{i phi} b as operators, in max-entry distance."""
    if a.shape != b.shape:
        return False
    overlap = np.trace(b.conj().T @ a)
    return _aligned_max_diff(a, b, overlap) < tol
