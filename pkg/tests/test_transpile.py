"""Transpiler: translation exactness, routing, optimization passes."""

import math

import numpy as np
import pytest

from morphq.backend import exact_output_probabilities
from morphq.circuit import Circuit, Composite, CouplingMap, Gate, Measure, flatten
from morphq.errors import MapTooSmall, NoDecompositionRule
from morphq.gates import build_gate_catalog, gate_spec
from morphq.generator import GenConfig, generate_program, new_rng
from morphq.linalg import embed_gate, matrices_equal_up_to_phase
from morphq.transpile import (
    UNIVERSAL_GATE_SETS,
    optimize,
    pipeline_for_level,
    route_to_coupling_map,
    translate_to_gate_set,
    zyz_angles,
)
from morphq import defects


def circuit_unitary(c: Circuit) -> np.ndarray:
    mat = np.eye(2**c.n_qubits, dtype=complex)
    for ins in flatten(c).instructions:
        if isinstance(ins, Measure):
            continue
        gate = gate_spec(ins.name).matrix(tuple(float(p) for p in ins.params))
        mat = embed_gate(gate, ins.qubits, c.n_qubits) @ mat
    return mat


def haar_unitary(rng) -> np.ndarray:
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestZyz:
    def test_random_unitaries(self):
        rng = np.random.default_rng(31)
        from morphq.gates import ry_matrix, rz_matrix

        for _ in range(1000):
            mat = haar_unitary(rng)
            theta, phi, lam, phase = zyz_angles(mat)
            recon = np.exp(1j * phase) * (
                rz_matrix(phi) @ ry_matrix(theta) @ rz_matrix(lam)
            )
            assert np.abs(recon - mat).max() < 1e-9

    def test_catalog_single_qubit_gates(self):
        for spec in build_gate_catalog().values():
            if spec.arity == 1 and spec.param_count == 0:
                zyz_angles(spec.matrix())


class TestTranslate:
    @pytest.mark.parametrize("set_name", sorted(UNIVERSAL_GATE_SETS))
    def test_whole_catalog_translates_exactly(self, set_name):
        target = UNIVERSAL_GATE_SETS[set_name]
        rng = new_rng(77)
        for spec in sorted(build_gate_catalog().values(), key=lambda s: s.name):
            params = tuple(rng.uniform(0, 2 * math.pi, size=spec.param_count))
            qubits = tuple(int(q) for q in rng.permutation(spec.arity))
            c = Circuit(spec.arity, 0, (Gate(spec.name, qubits, params),))
            translated = translate_to_gate_set(c, target)
            assert all(ins.name in target for ins in translated.instructions)
            assert matrices_equal_up_to_phase(
                circuit_unitary(translated), circuit_unitary(c), 1e-7
            ), (spec.name, set_name)

    def test_h_under_u1_uses_rotations(self):
        c = Circuit(1, 0, (Gate("h", (0,)),))
        t = translate_to_gate_set(c, UNIVERSAL_GATE_SETS["U1"])
        assert {ins.name for ins in t.instructions} <= {"rx", "ry", "rz", "p"}
        assert matrices_equal_up_to_phase(circuit_unitary(t), circuit_unitary(c), 1e-7)

    def test_circuit_already_in_target_unchanged(self):
        c = Circuit(2, 0, (Gate("rz", (0,), (0.3,)), Gate("cx", (0, 1))))
        t = translate_to_gate_set(c, UNIVERSAL_GATE_SETS["U1"])
        assert t.instructions == c.instructions

    def test_identity_gate_never_errors(self):
        for target in UNIVERSAL_GATE_SETS.values():
            c = Circuit(1, 0, (Gate("id", (0,)),))
            t = translate_to_gate_set(c, target)
            assert matrices_equal_up_to_phase(
                circuit_unitary(t), np.eye(2), 1e-7
            )

    def test_planted_defect_breaks_identity_rule(self):
        c = Circuit(1, 0, (Gate("id", (0,)),))
        with defects.planted(defects.TRANSLATE_MISSING_ID_RULE):
            with pytest.raises(NoDecompositionRule):
                translate_to_gate_set(c, UNIVERSAL_GATE_SETS["U1"])

    def test_unregistered_target_rejected(self):
        from morphq.errors import BackendError

        with pytest.raises(BackendError):
            translate_to_gate_set(Circuit(1, 0, ()), ("h", "t"))

    def test_composites_are_inlined(self):
        sub = Circuit(2, 0, (Gate("h", (0,)), Gate("cx", (0, 1))))
        c = Circuit(
            2, 0, (Composite("s", (0, 1)), Composite("s", (0, 1), (), True)), {"s": sub}
        )
        t = translate_to_gate_set(c, UNIVERSAL_GATE_SETS["U3"])
        assert not t.subcircuits
        assert matrices_equal_up_to_phase(circuit_unitary(t), np.eye(4), 1e-7)


class TestRoute:
    LINE3 = CouplingMap(3, ((0, 1), (1, 2)))

    def test_distant_cx_gets_swaps(self):
        c = Circuit(3, 3, (Gate("h", (0,)), Gate("cx", (0, 2)),
                           Measure(0, 0), Measure(1, 1), Measure(2, 2)))
        routed = route_to_coupling_map(c, self.LINE3)
        assert any(ins.name == "swap" for ins in routed.instructions
                   if isinstance(ins, Gate))
        assert exact_output_probabilities(routed) == pytest.approx(
            exact_output_probabilities(c), abs=1e-9
        )

    def test_respecting_circuit_unchanged_in_placement(self):
        c = Circuit(3, 3, (Gate("cx", (0, 1)), Gate("cx", (1, 2)),
                           Measure(0, 0), Measure(1, 1), Measure(2, 2)))
        routed = route_to_coupling_map(c, self.LINE3)
        gates = [i for i in routed.instructions if isinstance(i, Gate)]
        assert [g.name for g in gates] == ["cx", "cx"]

    def test_all_two_qubit_gates_on_edges(self):
        rng = new_rng(8)
        from morphq.transforms import random_coupling_map

        for seed in range(40):
            p = generate_program(GenConfig(seed=seed, max_qubits=6))
            cmap = random_coupling_map(p.circuit.n_qubits, rng)
            routed = route_to_coupling_map(p.circuit, cmap)
            for ins in routed.instructions:
                if isinstance(ins, Gate) and len(ins.qubits) == 2:
                    assert cmap.has_edge(*ins.qubits)

    def test_distribution_preserved_on_random_maps(self):
        rng = new_rng(9)
        from morphq.transforms import random_coupling_map

        for seed in range(30):
            p = generate_program(GenConfig(seed=200 + seed, max_qubits=5))
            cmap = random_coupling_map(p.circuit.n_qubits, rng)
            routed = route_to_coupling_map(p.circuit, cmap)
            d1 = exact_output_probabilities(p.circuit)
            d2 = exact_output_probabilities(routed)
            keys = set(d1) | set(d2)
            assert all(abs(d1.get(k, 0) - d2.get(k, 0)) < 1e-9 for k in keys)

    def test_map_too_small(self):
        c = Circuit(3, 3, (Gate("cx", (0, 2)),))
        with pytest.raises(MapTooSmall):
            route_to_coupling_map(c, CouplingMap(2, ((0, 1),)))


class TestOptimize:
    def test_level0_is_identity(self):
        c = Circuit(1, 0, (Gate("x", (0,)), Gate("x", (0,))))
        assert optimize(c, 0).instructions == c.instructions

    def test_self_inverse_pair_cancels(self):
        c = Circuit(1, 0, (Gate("x", (0,)), Gate("x", (0,))))
        assert optimize(c, 1).instructions == ()

    def test_rotation_merge(self):
        c = Circuit(1, 0, (Gate("rz", (0,), (0.25,)), Gate("rz", (0,), (0.5,))))
        out = optimize(c, 2)
        assert out.instructions == (Gate("rz", (0,), (0.75,)),)

    def test_pipeline_levels_are_supersets(self):
        previous: tuple = ()
        for level in range(4):
            passes = pipeline_for_level(level).passes
            assert set(previous) <= set(passes)
            previous = passes
        assert pipeline_for_level(0).passes == ()

    def test_commutation_cancellation_across_commuting_gate(self):
        # rz on the control commutes with cx: x-pair separated by them cancels
        c = Circuit(
            2, 0,
            (Gate("rz", (0,), (0.3,)), Gate("cx", (0, 1)),
             Gate("rz", (0,), (0.4,)), Gate("cx", (0, 1))),
        )
        out = optimize(c, 3)
        assert out.gate_count() <= c.gate_count()

    def test_gate_count_never_increases_and_unitary_preserved(self):
        rng = new_rng(13)
        from morphq.generator import draw_gate_sequence

        for _ in range(60):
            n = int(rng.integers(1, 5))
            c = Circuit(n, 0, tuple(draw_gate_sequence(n, int(rng.integers(0, 20)), rng)))
            for level in range(4):
                out = optimize(c, level)
                assert out.gate_count() <= c.gate_count()
                assert matrices_equal_up_to_phase(
                    circuit_unitary(out), circuit_unitary(c), 1e-7
                ), level

    def test_composites_act_as_barriers(self):
        sub = Circuit(1, 0, (Gate("x", (0,)),))
        c = Circuit(
            1, 0,
            (Gate("h", (0,)), Composite("s", (0,)), Gate("h", (0,))),
            {"s": sub},
        )
        out = optimize(c, 3)
        assert out.gate_count() == 3

    def test_dimension_overflow_defect_raises_on_wide_composites(self):
        from morphq.errors import BackendError

        sub = Circuit(11, 0, ())
        c = Circuit(
            11, 0,
            (Gate("h", (0,)), Composite("s", tuple(range(11)))),
            {"s": sub},
        )
        optimize(c, 3)  # healthy: composite is a barrier
        with defects.planted(defects.COMMUTATION_DIM_OVERFLOW):
            with pytest.raises(BackendError, match="too many subscripts"):
                optimize(c, 3)
        # below the threshold the defect stays silent
        sub10 = Circuit(10, 0, ())
        c10 = Circuit(10, 0, (Gate("h", (0,)), Composite("s", tuple(range(10)))),
                      {"s": sub10})
        with defects.planted(defects.COMMUTATION_DIM_OVERFLOW):
            optimize(c10, 3)
