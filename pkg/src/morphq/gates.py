"""Gate catalog: names, arities, parameter counts, and unitary builders.

Matrix convention: for a k-qubit gate, argument i of the instruction maps to
bit i of the gate-local basis index (argument 0 is the least significant
bit). Controlled gates place their controls on the low arguments. This
matches the simulator's statevector ordering where qubit 0 is the LSB.

The catalog spans arities 1..5 and 0..4 angle parameters. Every builder
returns a unitary (checked by the test suite over random angles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

SQRT2_INV = 1.0 / math.sqrt(2.0)

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT2_INV
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_T = np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex)
_SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def rx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex
    )


def phase_matrix(lam: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * lam)]], dtype=complex)


def u_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """Generic single-qubit gate u(theta, phi, lam)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def controlled(base: np.ndarray, n_controls: int) -> np.ndarray:
    """Embed `base` as a multi-controlled gate.

    Controls occupy arguments 0..n_controls-1 (the low bits); the base gate
    acts on the remaining high arguments when every control bit is 1.
    """
    k = n_controls + int(math.log2(base.shape[0]))
    dim = 2**k
    cmask = (1 << n_controls) - 1
    mat = np.eye(dim, dtype=complex)
    for i in range(dim):
        if i & cmask != cmask:
            continue
        for j in range(dim):
            if j & cmask != cmask:
                continue
            mat[i, j] = base[i >> n_controls, j >> n_controls]
    return mat


def two_qubit_pauli_rotation(theta: float, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """exp(-i theta/2 * P1 (x) P0) with P0 on argument 0, P1 on argument 1."""
    op = np.kron(p1, p0)
    return math.cos(theta / 2) * np.eye(4, dtype=complex) - 1j * math.sin(theta / 2) * op


Builder = Callable[..., np.ndarray]


@dataclass(frozen=True)
class GateSpec:
    """Catalog entry: a named gate with a unitary builder.

    `unitary` takes `param_count` floats and returns the 2^arity square
    matrix in the argument-i-is-bit-i convention described above.
    """

    name: str
    arity: int
    param_count: int
    unitary: Builder

    def matrix(self, params: tuple[float, ...] = ()) -> np.ndarray:
        if len(params) != self.param_count:
            raise ValueError(
                f"gate '{self.name}' takes {self.param_count} parameters, got {len(params)}"
            )
        return self.unitary(*params)


def _specs() -> list[GateSpec]:
    g = GateSpec
    return [
        # 1-qubit, fixed
        g("id", 1, 0, lambda: _I2),
        g("x", 1, 0, lambda: _X),
        g("y", 1, 0, lambda: _Y),
        g("z", 1, 0, lambda: _Z),
        g("h", 1, 0, lambda: _H),
        g("s", 1, 0, lambda: _S),
        g("sdg", 1, 0, lambda: _S.conj().T),
        g("t", 1, 0, lambda: _T),
        g("tdg", 1, 0, lambda: _T.conj().T),
        g("sx", 1, 0, lambda: _SX),
        # 1-qubit, parameterized
        g("rx", 1, 1, rx_matrix),
        g("ry", 1, 1, ry_matrix),
        g("rz", 1, 1, rz_matrix),
        g("p", 1, 1, phase_matrix),
        g("u", 1, 3, u_matrix),
        # 2-qubit
        g("cx", 2, 0, lambda: controlled(_X, 1)),
        g("cy", 2, 0, lambda: controlled(_Y, 1)),
        g("cz", 2, 0, lambda: controlled(_Z, 1)),
        g("ch", 2, 0, lambda: controlled(_H, 1)),
        g("swap", 2, 0, lambda: _SWAP),
        g("crx", 2, 1, lambda t: controlled(rx_matrix(t), 1)),
        g("cry", 2, 1, lambda t: controlled(ry_matrix(t), 1)),
        g("crz", 2, 1, lambda t: controlled(rz_matrix(t), 1)),
        g("cp", 2, 1, lambda t: controlled(phase_matrix(t), 1)),
        g("cu", 2, 4, lambda t, p, l, gm: controlled(np.exp(1j * gm) * u_matrix(t, p, l), 1)),
        g("rxx", 2, 1, lambda t: two_qubit_pauli_rotation(t, _X, _X)),
        g("ryy", 2, 1, lambda t: two_qubit_pauli_rotation(t, _Y, _Y)),
        g("rzz", 2, 1, lambda t: two_qubit_pauli_rotation(t, _Z, _Z)),
        g("rzx", 2, 1, lambda t: two_qubit_pauli_rotation(t, _Z, _X)),
        # 3-qubit
        g("ccx", 3, 0, lambda: controlled(_X, 2)),
        g("cswap", 3, 0, lambda: controlled(_SWAP, 1)),
        # 4-qubit
        g("c3x", 4, 0, lambda: controlled(_X, 3)),
        g("c3sx", 4, 0, lambda: controlled(_SX, 3)),
        # 5-qubit
        g("c4x", 5, 0, lambda: controlled(_X, 4)),
    ]


@lru_cache(maxsize=1)
def build_gate_catalog() -> dict[str, GateSpec]:
    """Return the fixed gate catalog keyed by gate name."""
    catalog = {spec.name: spec for spec in _specs()}
    assert len(catalog) == len(_specs()), "duplicate gate name in catalog"
    return catalog


def gate_spec(name: str) -> GateSpec:
    try:
        return build_gate_catalog()[name]
    except KeyError:
        raise KeyError(f"unknown gate '{name}'") from None


# Gates whose single angle negates under inversion.
ROTATION_GATES = frozenset(
    {"rx", "ry", "rz", "p", "crx", "cry", "crz", "cp", "rxx", "ryy", "rzz", "rzx"}
)

# Gates that are their own inverse.
SELF_INVERSE_GATES = frozenset(
    {"id", "x", "y", "z", "h", "cx", "cy", "cz", "ch", "swap", "ccx", "cswap", "c3x", "c4x"}
)

# Fixed gates inverted by swapping to a partner gate.
INVERSE_NAME_PAIRS = {"s": "sdg", "sdg": "s", "t": "tdg", "tdg": "t"}
