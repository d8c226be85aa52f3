"""Metamorphic transformations: preconditions, semantics, chaining."""

import numpy as np
import pytest

from morphq import transforms as T
from morphq.backend import OutputDistribution, Success, exact_distribution
from morphq.circuit import (
    Circuit,
    Composite,
    Gate,
    Measure,
    Program,
    Symbol,
    interaction_components,
)
from morphq.compare import postprocess_followup
from morphq.errors import NoLiteralsAvailable, PreconditionViolated
from morphq.generator import GenConfig, generate_program, new_rng
from morphq.serialize import dumps_program


def exact_dists_match(a: dict, b: dict, tol: float = 1e-9) -> bool:
    keys = set(a) | set(b)
    return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) < tol for k in keys)


def processed_exact(follow, records) -> dict:
    """Exact follow-up distribution mapped back into the source frame."""
    if isinstance(follow, tuple):
        outcome = tuple(
            Success(OutputDistribution(dict(exact_distribution(part)), 1.0))
            for part in follow
        )
    else:
        outcome = Success(OutputDistribution(dict(exact_distribution(follow)), 1.0))
    return dict(postprocess_followup(records, outcome).counts)


class TestPreconditions:
    def _program(self, coupling=False, added=False, entangling=False) -> Program:
        n = 4
        gates: tuple = ()
        if entangling:
            gates = tuple(Gate("cx", (i, i + 1)) for i in range(n - 1))
        gates += (Gate("rx", (0,), (0.4,)),)
        measures = tuple(Measure(q, q) for q in range(n))
        config = generate_program(GenConfig(seed=5, max_qubits=n)).config
        p = Program(Circuit(n, n, gates + measures), config)
        rng = new_rng(0)
        if coupling:
            p, _ = T.apply_change_coupling_map(p, rng)
        if added:
            p, _ = T.apply_add_register(p, rng)
        return p

    def test_partition_false_on_fully_entangling_circuit(self):
        p = self._program(entangling=True)
        assert not T.precondition(T.PARTITION, p)

    def test_coupling_map_false_after_add_register(self):
        p = self._program(added=True)
        assert not T.precondition(T.COUPLING_MAP, p)

    def test_add_register_false_after_coupling_map(self):
        p = self._program(coupling=True)
        assert not T.precondition(T.ADD_REGISTER, p)

    def test_roundtrip_always_true(self):
        for coupling in (False, True):
            for added in (False, True):
                if coupling and added:
                    continue  # the two preconditions exclude each other
                p = self._program(coupling=coupling, added=added)
                assert T.precondition(T.QASM_ROUNDTRIP, p)

    def test_full_table_over_stateful_flags(self):
        """Enumerate (transform, coupling-set, register-added) combinations."""
        for coupling in (False, True):
            for added in (False, True):
                if coupling and added:
                    continue
                p = self._program(coupling=coupling, added=added)
                for kind in T.TRANSFORM_KINDS:
                    expected = True
                    if kind == T.ADD_REGISTER:
                        expected = not coupling
                    elif kind == T.COUPLING_MAP:
                        expected = not added
                    elif kind == T.PARTITION:
                        expected = len(interaction_components(p.circuit)) >= 2
                    assert T.precondition(kind, p) is expected, (kind, coupling, added)

    def test_semantics_preserving_flags(self):
        assert T.NON_PRESERVING == {T.QUBIT_ORDER, T.PARTITION}
        for kind in T.TRANSFORM_KINDS:
            record = T._record(kind)
            assert record.semantics_preserving == (kind not in T.NON_PRESERVING)


class TestQubitOrder:
    def test_gates_remapped_measures_untouched(self):
        c = Circuit(3, 3, (Gate("cx", (1, 2)), Measure(0, 0), Measure(1, 1),
                           Measure(2, 2)))
        p = Program(c, generate_program(GenConfig(seed=1)).config)
        rng = new_rng(2)
        follow, record = T.apply_qubit_order(p, rng)
        m = record.mapping
        gate = follow.circuit.instructions[0]
        assert gate.qubits == (m[1], m[2])
        measures = [i for i in follow.circuit.instructions if isinstance(i, Measure)]
        assert [(i.qubit, i.clbit) for i in measures] == [(0, 0), (1, 1), (2, 2)]
        assert record.relation == T.REMAPPED
        assert not record.semantics_preserving

    def test_exact_equivalence_after_remap(self):
        rng = new_rng(3)
        for seed in range(50):
            src = generate_program(GenConfig(seed=seed, max_qubits=5))
            follow, record = T.apply_qubit_order(src, rng)
            assert exact_dists_match(
                exact_distribution(src), processed_exact(follow, [record])
            )


class TestNullEffect:
    def test_statevector_unchanged(self):
        rng = new_rng(4)
        for seed in range(40):
            src = generate_program(GenConfig(seed=seed, max_qubits=5))
            follow, record = T.apply_null_effect(src, rng)
            assert exact_dists_match(
                exact_distribution(src), processed_exact(follow, [record])
            )

    def test_inserts_composite_pair_before_measures(self):
        src = generate_program(GenConfig(seed=9, max_qubits=4))
        follow, record = T.apply_null_effect(src, new_rng(5))
        comps = [i for i in follow.circuit.instructions if isinstance(i, Composite)]
        assert len(comps) == 2
        assert comps[0].ref == comps[1].ref == record.subcircuit
        assert not comps[0].inverted and comps[1].inverted
        sub = follow.circuit.subcircuits[record.subcircuit]
        assert not any(isinstance(i, Measure) for i in sub.instructions)


class TestAddRegister:
    def test_adds_one_to_three_unused_qubits(self):
        rng = new_rng(6)
        for seed in range(20):
            src = generate_program(GenConfig(seed=seed, max_qubits=4))
            follow, record = T.apply_add_register(src, rng)
            k = len(record.added_clbits)
            assert 1 <= k <= 3
            assert follow.circuit.n_qubits == src.circuit.n_qubits + k
            touched = {
                q
                for ins in follow.circuit.instructions
                if not isinstance(ins, Measure)
                for q in ins.qubits
            }
            assert touched <= set(range(src.circuit.n_qubits))

    def test_added_bits_read_zero_and_marginalize_away(self):
        rng = new_rng(7)
        for seed in range(30):
            src = generate_program(GenConfig(seed=seed, max_qubits=4))
            follow, record = T.apply_add_register(src, rng)
            d = exact_distribution(follow)
            k = len(record.added_clbits)
            assert all(key[:k] == "0" * k for key in d)
            assert exact_dists_match(
                exact_distribution(src), processed_exact(follow, [record])
            )

    def test_rejected_after_coupling_map(self):
        src = generate_program(GenConfig(seed=3, max_qubits=4))
        p, _ = T.apply_change_coupling_map(src, new_rng(1))
        with pytest.raises(PreconditionViolated):
            T.apply_add_register(p, new_rng(2))


class TestInjectParams:
    def test_substitution_then_rebinding_is_identity(self):
        rng = new_rng(8)
        checked = 0
        for seed in range(40):
            src = generate_program(GenConfig(seed=seed, max_qubits=5))
            try:
                follow, record = T.apply_inject_params(src, rng)
            except NoLiteralsAvailable:
                continue
            checked += 1
            assert exact_dists_match(
                exact_distribution(src), processed_exact(follow, [record])
            )
            for name, value in record.injected:
                assert follow.bindings[name] == value
        assert checked >= 25

    def test_no_literals_raises(self):
        c = Circuit(1, 1, (Gate("h", (0,)), Measure(0, 0)))
        p = Program(c, generate_program(GenConfig(seed=1)).config)
        with pytest.raises(NoLiteralsAvailable):
            T.apply_inject_params(p, new_rng(1))

    def test_all_literals_can_be_replaced(self):
        c = Circuit(
            1, 1,
            (Gate("rx", (0,), (0.1,)), Gate("ry", (0,), (0.2,)),
             Gate("rz", (0,), (0.3,)), Measure(0, 0)),
        )
        p = Program(c, generate_program(GenConfig(seed=1, max_qubits=1)).config)
        for attempt in range(50):
            follow, record = T.apply_inject_params(p, new_rng(attempt))
            if len(record.injected) == 3:
                gates = [i for i in follow.circuit.instructions if isinstance(i, Gate)]
                assert all(isinstance(g.params[0], Symbol) for g in gates)
                assert len(follow.bindings) == 3
                return
        pytest.fail("never drew the full subset")


class TestPartition:
    def test_splits_into_compact_parts(self):
        c = Circuit(
            3, 3,
            (Gate("rx", (0,), (0.4,)), Gate("h", (1,)), Gate("cx", (1, 2)),
             Measure(0, 0), Measure(1, 1), Measure(2, 2)),
        )
        p = Program(c, generate_program(GenConfig(seed=1)).config)
        part_a, part_b, record = T.apply_partition(p, new_rng(3))
        sizes = sorted((part_a.circuit.n_qubits, part_b.circuit.n_qubits))
        assert sizes == [1, 2]
        assert sorted(record.partition_a + record.partition_b) == [0, 1, 2]
        assert record.relation == T.PRODUCT

    def test_product_reconstructs_exact_distribution(self):
        rng = new_rng(10)
        checked = 0
        for seed in range(300):
            src = generate_program(GenConfig(seed=seed, max_qubits=6, max_gates=8))
            if len(interaction_components(src.circuit)) < 2:
                continue
            part_a, part_b, record = T.apply_partition(src, rng)
            assert exact_dists_match(
                exact_distribution(src),
                processed_exact((part_a, part_b), [record]),
            )
            checked += 1
            if checked >= 50:
                break
        assert checked >= 50

    def test_requires_two_components(self):
        c = Circuit(2, 2, (Gate("cx", (0, 1)), Measure(0, 0), Measure(1, 1)))
        p = Program(c, generate_program(GenConfig(seed=1)).config)
        with pytest.raises(PreconditionViolated):
            T.apply_partition(p, new_rng(1))


class TestExecutionTransforms:
    def test_coupling_maps_are_connected(self):
        rng = new_rng(11)
        for n in range(1, 12):
            for _ in range(20):
                cmap = T.random_coupling_map(n, rng)
                assert cmap.n_qubits == n and cmap.is_connected()

    def test_gate_set_choice_is_registered(self):
        from morphq.transpile import UNIVERSAL_GATE_SETS

        src = generate_program(GenConfig(seed=2, max_qubits=3))
        follow, record = T.apply_change_gate_set(src, new_rng(4))
        assert follow.config.target_gate_set == UNIVERSAL_GATE_SETS[record.gate_set]

    def test_opt_level_always_changes(self):
        src = generate_program(GenConfig(seed=2, max_qubits=3))
        rng = new_rng(5)
        for _ in range(40):
            follow, record = T.apply_change_opt_level(src, rng)
            assert follow.config.opt_level != src.config.opt_level
            src = follow

    def test_backend_switches_to_other(self):
        src = generate_program(GenConfig(seed=2, max_qubits=3))
        follow, record = T.apply_change_backend(src, new_rng(6))
        assert follow.config.backend_id != src.config.backend_id
        assert record.old_value == src.config.backend_id

    def test_qasm_roundtrip_defers_to_execution(self):
        src = generate_program(GenConfig(seed=2, max_qubits=3))
        follow, record = T.apply_qasm_roundtrip(src)
        assert follow.qasm_roundtrips == src.qasm_roundtrips + 1
        assert follow.circuit == src.circuit


class TestChain:
    def test_stops_after_non_preserving(self):
        rng = new_rng(12)
        for seed in range(300):
            src = generate_program(GenConfig(seed=seed, max_qubits=5, max_gates=8))
            follow, records = T.chain_transforms(src, T.TransformChainPolicy(4), rng)
            for record in records[:-1]:
                assert record.semantics_preserving
            if isinstance(follow, tuple):
                assert records[-1].kind == T.PARTITION

    def test_chain_length_within_policy(self):
        rng = new_rng(13)
        for seed in range(200):
            src = generate_program(GenConfig(seed=seed, max_qubits=4))
            _, records = T.chain_transforms(src, T.TransformChainPolicy(4), rng)
            assert 1 <= len(records) <= 4

    def test_every_kind_appears_and_chains_compose(self):
        rng = new_rng(14)
        seen: set[str] = set()
        multi = 0
        for seed in range(3000):
            src = generate_program(GenConfig(seed=seed, max_qubits=5, max_gates=8))
            _, records = T.chain_transforms(src, T.TransformChainPolicy(4), rng)
            seen.update(r.kind for r in records)
            if len(records) >= 2:
                multi += 1
        assert seen == set(T.TRANSFORM_KINDS)
        assert multi > 500

    def test_deterministic_given_seed(self):
        src = generate_program(GenConfig(seed=321, max_qubits=5))
        a, ra = T.chain_transforms(src, T.TransformChainPolicy(4), new_rng(99))
        b, rb = T.chain_transforms(src, T.TransformChainPolicy(4), new_rng(99))
        assert ra == rb
        if isinstance(a, tuple):
            assert dumps_program(a[0]) == dumps_program(b[0])
            assert dumps_program(a[1]) == dumps_program(b[1])
        else:
            assert dumps_program(a) == dumps_program(b)


def test_display_names_match_relationship_table():
    assert T.DISPLAY_NAMES[T.QUBIT_ORDER] == "Change of qubit order"
    assert T.DISPLAY_NAMES[T.NULL_EFFECT] == "Inject null-effect operation"
    assert T.DISPLAY_NAMES[T.ADD_REGISTER] == "Add quantum register"
    assert T.DISPLAY_NAMES[T.INJECT_PARAMS] == "Inject parameters"
    assert T.DISPLAY_NAMES[T.PARTITION] == "Partitioned execution"
    assert T.DISPLAY_NAMES[T.QASM_ROUNDTRIP] == "Roundtrip conversion via QASM"
    assert T.DISPLAY_NAMES[T.COUPLING_MAP] == "Change of coupling map"
    assert T.DISPLAY_NAMES[T.GATE_SET] == "Change of gate set"
    assert T.DISPLAY_NAMES[T.OPT_LEVEL] == "Change of optimization level"
    assert T.DISPLAY_NAMES[T.BACKEND] == "Change of backend"


def test_record_serialization_roundtrip():
    rng = new_rng(15)
    src = generate_program(GenConfig(seed=77, max_qubits=5))
    _, records = T.chain_transforms(src, T.TransformChainPolicy(4), rng)
    for record in records:
        assert T.record_from_json(T.record_to_json(record)) == record
