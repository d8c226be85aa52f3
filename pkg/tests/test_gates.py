"""Gate catalog: completeness, unitarity, and known matrices."""

import math

import numpy as np
import pytest

from morphq.gates import build_gate_catalog, gate_spec

REQUIRED_GATES = [
    # (name, arity, param_count)
    ("id", 1, 0), ("x", 1, 0), ("y", 1, 0), ("z", 1, 0), ("h", 1, 0),
    ("s", 1, 0), ("sdg", 1, 0), ("t", 1, 0), ("tdg", 1, 0), ("sx", 1, 0),
    ("rx", 1, 1), ("ry", 1, 1), ("rz", 1, 1), ("p", 1, 1), ("u", 1, 3),
    ("cx", 2, 0), ("cy", 2, 0), ("cz", 2, 0), ("ch", 2, 0), ("swap", 2, 0),
    ("crx", 2, 1), ("cry", 2, 1), ("crz", 2, 1), ("cp", 2, 1),
    ("rxx", 2, 1), ("ryy", 2, 1), ("rzz", 2, 1), ("rzx", 2, 1),
    ("ccx", 3, 0), ("cswap", 3, 0),
]


@pytest.mark.parametrize("name,arity,param_count", REQUIRED_GATES)
def test_required_gates_present(name, arity, param_count):
    spec = gate_spec(name)
    assert spec.arity == arity
    assert spec.param_count == param_count


def test_catalog_spans_arities_one_to_five():
    catalog = build_gate_catalog()
    assert len(catalog) >= 30
    assert {spec.arity for spec in catalog.values()} == {1, 2, 3, 4, 5}
    assert any(spec.arity == 4 for spec in catalog.values())
    assert any(spec.arity == 5 for spec in catalog.values())


def test_param_counts_cover_zero_to_four():
    counts = {spec.param_count for spec in build_gate_catalog().values()}
    assert 0 in counts and 4 in counts


def test_hadamard_matrix():
    mat = gate_spec("h").matrix()
    expected = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    assert np.abs(mat - expected).max() < 1e-12


def test_identity_matrix():
    assert np.array_equal(gate_spec("id").matrix(), np.eye(2))


def test_crz_shape():
    spec = gate_spec("crz")
    assert spec.arity == 2 and spec.param_count == 1
    assert spec.matrix((0.4,)).shape == (4, 4)


def test_unitarity_over_random_parameters():
    rng = np.random.default_rng(2024)
    for spec in build_gate_catalog().values():
        trials = 1000 if spec.param_count else 1
        for _ in range(trials):
            params = tuple(rng.uniform(0, 2 * math.pi, size=spec.param_count))
            mat = spec.matrix(params)
            dim = 2**spec.arity
            assert mat.shape == (dim, dim)
            err = np.abs(mat @ mat.conj().T - np.eye(dim)).max()
            assert err < 1e-9, (spec.name, err)


def test_cx_maps_basis_states():
    # argument 0 is the control and the low bit: |01> (q0=1) -> |11>
    mat = gate_spec("cx").matrix()
    basis = np.eye(4)
    assert np.array_equal(mat @ basis[:, 1], basis[:, 3])
    assert np.array_equal(mat @ basis[:, 3], basis[:, 1])
    assert np.array_equal(mat @ basis[:, 0], basis[:, 0])


def test_gate_param_count_enforced():
    with pytest.raises(ValueError):
        gate_spec("rx").matrix(())


def test_unknown_gate_rejected():
    with pytest.raises(KeyError):
        gate_spec("nope")
