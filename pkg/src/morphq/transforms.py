"""The ten metamorphic program transformations and their chaining policy.

Each transformation is precondition-guarded, deterministic given
(program, rng state), and returns the transformed program together with a
TransformRecord describing what happened and which output relation the
comparator must apply. Change-of-qubit-order and partitioned execution do
not preserve semantics; applying either one ends a transformation chain so
only the last transformation determines the expected output relation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .backend import registered_backends
from .circuit import (
    Circuit,
    Composite,
    CouplingMap,
    Gate,
    Instruction,
    Measure,
    Program,
    Symbol,
    interaction_components,
)
from .errors import NoLiteralsAvailable, OnlyOneBackend, PreconditionViolated, SchemaMismatch
from .generator import Rng, draw_gate_sequence
from .transpile import UNIVERSAL_GATE_SETS

QUBIT_ORDER = "qubit_order"
NULL_EFFECT = "null_effect"
ADD_REGISTER = "add_register"
INJECT_PARAMS = "inject_params"
PARTITION = "partition"
QASM_ROUNDTRIP = "qasm_roundtrip"
COUPLING_MAP = "coupling_map"
GATE_SET = "gate_set"
OPT_LEVEL = "opt_level"
BACKEND = "backend"

TRANSFORM_KINDS = (
    QUBIT_ORDER,
    NULL_EFFECT,
    ADD_REGISTER,
    INJECT_PARAMS,
    PARTITION,
    QASM_ROUNDTRIP,
    COUPLING_MAP,
    GATE_SET,
    OPT_LEVEL,
    BACKEND,
)

# Report names, matching the relationship table rows.
DISPLAY_NAMES = {
    QUBIT_ORDER: "Change of qubit order",
    NULL_EFFECT: "Inject null-effect operation",
    ADD_REGISTER: "Add quantum register",
    INJECT_PARAMS: "Inject parameters",
    PARTITION: "Partitioned execution",
    QASM_ROUNDTRIP: "Roundtrip conversion via QASM",
    COUPLING_MAP: "Change of coupling map",
    GATE_SET: "Change of gate set",
    OPT_LEVEL: "Change of optimization level",
    BACKEND: "Change of backend",
}

NON_PRESERVING = frozenset({QUBIT_ORDER, PARTITION})

EQUIVALENCE = "equivalence"
REMAPPED = "remapped_equivalence"
PRODUCT = "product_equivalence"


@dataclass(frozen=True)
class TransformRecord:
    kind: str
    semantics_preserving: bool
    relation: str
    mapping: tuple[int, ...] | None = None  # qubit_order: i -> mapping[i]
    subcircuit: str | None = None
    added_clbits: tuple[int, ...] | None = None
    injected: tuple[tuple[str, float], ...] | None = None
    partition_a: tuple[int, ...] | None = None  # original clbit positions
    partition_b: tuple[int, ...] | None = None
    total_clbits: int | None = None
    coupling_edges: tuple[tuple[int, int], ...] | None = None
    gate_set: str | None = None
    old_value: str | None = None
    new_value: str | None = None

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES[self.kind]


def _record(kind: str, relation: str = EQUIVALENCE, **fields) -> TransformRecord:
    return TransformRecord(
        kind=kind,
        semantics_preserving=kind not in NON_PRESERVING,
        relation=relation,
        **fields,
    )


@dataclass(frozen=True)
class TransformChainPolicy:
    max_transforms: int = 4

    def __post_init__(self) -> None:
        if self.max_transforms < 1:
            raise ValueError("max_transforms must be >= 1")


def _has_record(p: Program, kind: str) -> bool:
    return any(r.kind == kind for r in p.provenance)


def precondition(kind: str, p: Program) -> bool:
    """Precondition table: may this transformation be applied to p?"""
    if kind == ADD_REGISTER:
        return p.config.coupling_map is None
    if kind == COUPLING_MAP:
        return not _has_record(p, ADD_REGISTER)
    if kind == PARTITION:
        return len(interaction_components(p.circuit)) >= 2
    if kind not in TRANSFORM_KINDS:
        raise ValueError(f"unknown transformation kind '{kind}'")
    return True


def _split_at_measures(c: Circuit) -> tuple[list[Instruction], list[Instruction]]:
    for i, ins in enumerate(c.instructions):
        if isinstance(ins, Measure):
            return list(c.instructions[:i]), list(c.instructions[i:])
    return list(c.instructions), []


def _literal_positions(c: Circuit) -> list[tuple[int, int]]:
    out = []
    for i, ins in enumerate(c.instructions):
        if isinstance(ins, Gate):
            out.extend((i, j) for j, prm in enumerate(ins.params) if not isinstance(prm, Symbol))
    return out


# ---------------------------------------------------------------------------
# Circuit transformations
# ---------------------------------------------------------------------------


def apply_qubit_order(p: Program, rng: Rng) -> tuple[Program, TransformRecord]:
    """Permute gate qubit indices; measurements stay in place.

    The record stores the mapping m so the comparator can apply its inverse
    to the follow-up's measured bit order.
    """
    c = p.circuit
    mapping = tuple(int(v) for v in rng.permutation(c.n_qubits))
    new_instrs: list[Instruction] = []
    for ins in c.instructions:
        if isinstance(ins, Measure):
            new_instrs.append(ins)
        else:
            new_instrs.append(replace(ins, qubits=tuple(mapping[q] for q in ins.qubits)))
    record = _record(QUBIT_ORDER, relation=REMAPPED, mapping=mapping)
    circuit = Circuit(c.n_qubits, c.n_clbits, tuple(new_instrs), dict(c.subcircuits))
    return _advance(p, circuit, record), record


def apply_null_effect(p: Program, rng: Rng) -> tuple[Program, TransformRecord]:
    """Insert a random subcircuit immediately followed by its inverse.

    The subcircuit spans the full quantum register; half the time it also
    carries the classical register (which QASM 2.0 cannot express, so the
    exporter must reject those composites cleanly).
    """
    c = p.circuit
    attach_clbits = bool(rng.integers(2))
    n_gates = int(1 + rng.integers(8))
    body = draw_gate_sequence(c.n_qubits, n_gates, rng)
    sub_clbits = c.n_clbits if attach_clbits else 0
    sub = Circuit(c.n_qubits, sub_clbits, tuple(body))
    name, counter = "subcirc", 0
    while name in c.subcircuits:
        counter += 1
        name = f"subcirc{counter}"
    gates, measures = _split_at_measures(c)
    pos = int(rng.integers(0, len(gates) + 1))
    qargs = tuple(range(c.n_qubits))
    cargs = tuple(range(sub_clbits))
    pair = [Composite(name, qargs, cargs, False), Composite(name, qargs, cargs, True)]
    instrs = tuple(gates[:pos] + pair + gates[pos:] + measures)
    subs = dict(c.subcircuits)
    subs[name] = sub
    record = _record(NULL_EFFECT, subcircuit=name)
    return _advance(p, Circuit(c.n_qubits, c.n_clbits, instrs, subs), record), record


def apply_add_register(p: Program, rng: Rng) -> tuple[Program, TransformRecord]:
    """Append 1..3 fresh, never-touched qubits (measured, always reading 0)."""
    if not precondition(ADD_REGISTER, p):
        raise PreconditionViolated("cannot add a register once the coupling map is fixed")
    c = p.circuit
    k = int(1 + rng.integers(3))
    added = tuple(range(c.n_clbits, c.n_clbits + k))
    instrs = tuple(c.instructions) + tuple(
        Measure(c.n_qubits + i, c.n_clbits + i) for i in range(k)
    )
    circuit = Circuit(c.n_qubits + k, c.n_clbits + k, instrs, dict(c.subcircuits))
    record = _record(ADD_REGISTER, added_clbits=added)
    return _advance(p, circuit, record), record


def apply_inject_params(p: Program, rng: Rng) -> tuple[Program, TransformRecord]:
    """Replace a random nonempty subset of literal angles with fresh symbols.

    The original values are recorded in the program bindings, applied again
    before the transpilation stage, so semantics are unchanged.
    """
    c = p.circuit
    positions = _literal_positions(c)
    if not positions:
        raise NoLiteralsAvailable("program has no literal parameters to inject")
    size = int(1 + rng.integers(len(positions)))
    chosen_idx = sorted(int(i) for i in rng.choice(len(positions), size=size, replace=False))
    used = set(p.bindings)
    instrs = list(c.instructions)
    bindings = dict(p.bindings)
    injected = []
    counter = 0
    for idx in chosen_idx:
        ins_i, prm_i = positions[idx]
        while f"p{counter}" in used:
            counter += 1
        name = f"p{counter}"
        used.add(name)
        gate = instrs[ins_i]
        value = float(gate.params[prm_i])
        params = tuple(
            Symbol(name) if j == prm_i else prm for j, prm in enumerate(gate.params)
        )
        instrs[ins_i] = replace(gate, params=params)
        bindings[name] = value
        injected.append((name, value))
    circuit = Circuit(c.n_qubits, c.n_clbits, tuple(instrs), dict(c.subcircuits))
    record = _record(INJECT_PARAMS, injected=tuple(injected))
    follow = replace(p, circuit=circuit, bindings=bindings, provenance=p.provenance + (record,))
    return follow, record


def apply_partition(p: Program, rng: Rng) -> tuple[Program, Program, TransformRecord]:
    """Split a circuit with non-interacting qubit subsets into two programs.

    Each part keeps exactly the instructions touching its qubit group, with
    indices compacted, and measures its own group. The comparator
    reconstructs the full distribution as the Cartesian product.
    """
    comps = interaction_components(p.circuit)
    if len(comps) < 2:
        raise PreconditionViolated("partition requires >= 2 non-interacting qubit subsets")
    order = [comps[int(i)] for i in rng.permutation(len(comps))]
    cut = int(1 + rng.integers(len(order) - 1))
    group_a = sorted(set().union(*order[:cut]))
    group_b = sorted(set().union(*order[cut:]))
    part_a, clbits_a = _extract_part(p.circuit, group_a)
    part_b, clbits_b = _extract_part(p.circuit, group_b)
    record = _record(
        PARTITION,
        relation=PRODUCT,
        partition_a=tuple(clbits_a),
        partition_b=tuple(clbits_b),
        total_clbits=p.circuit.n_clbits,
    )
    prov = p.provenance + (record,)
    prog_a = replace(p, circuit=part_a, provenance=prov)
    prog_b = replace(p, circuit=part_b, provenance=prov)
    return prog_a, prog_b, record


def _extract_part(c: Circuit, group: list[int]) -> tuple[Circuit, list[int]]:
    qmap = {q: i for i, q in enumerate(group)}
    clbits = sorted(
        ins.clbit
        for ins in c.instructions
        if isinstance(ins, Measure) and ins.qubit in qmap
    )
    cmap = {b: i for i, b in enumerate(clbits)}
    instrs: list[Instruction] = []
    refs: set[str] = set()
    for ins in c.instructions:
        if isinstance(ins, Measure):
            if ins.qubit in qmap:
                instrs.append(Measure(qmap[ins.qubit], cmap[ins.clbit]))
            continue
        touched = set(ins.qubits)
        if not touched & set(group):
            continue
        if not touched <= set(group):  # impossible for interaction components
            raise PreconditionViolated("instruction crosses the partition boundary")
        if isinstance(ins, Composite):
            refs.add(ins.ref)
        instrs.append(replace(ins, qubits=tuple(qmap[q] for q in ins.qubits)))
    subs = {k: v for k, v in c.subcircuits.items() if k in refs}
    return Circuit(len(group), len(clbits), tuple(instrs), subs), clbits


# ---------------------------------------------------------------------------
# Representation and execution transformations
# ---------------------------------------------------------------------------


def apply_qasm_roundtrip(p: Program) -> tuple[Program, TransformRecord]:
    """Schedule one QASM export/import pass right before execution.

    The roundtrip runs inside the execution pipeline so exporter and parser
    failures surface as follow-up crashes, which is exactly what the oracle
    is meant to observe.
    """
    record = _record(QASM_ROUNDTRIP)
    follow = replace(
        p, qasm_roundtrips=p.qasm_roundtrips + 1, provenance=p.provenance + (record,)
    )
    return follow, record


def random_coupling_map(n_qubits: int, rng: Rng) -> CouplingMap:
    """Random connected graph: a random spanning tree plus extra edges."""
    edges: list[tuple[int, int]] = []
    for i in range(1, n_qubits):
        j = int(rng.integers(i))
        edges.append((j, i))
    candidates = [
        (a, b)
        for a in range(n_qubits)
        for b in range(a + 1, n_qubits)
        if (a, b) not in edges
    ]
    if candidates:
        n_extra = int(rng.integers(0, len(candidates) + 1))
        if n_extra:
            picks = rng.choice(len(candidates), size=min(n_extra, 2 * n_qubits), replace=False)
            edges.extend(candidates[int(i)] for i in sorted(picks))
    return CouplingMap(n_qubits, tuple(edges))


def apply_change_coupling_map(p: Program, rng: Rng) -> tuple[Program, TransformRecord]:
    if not precondition(COUPLING_MAP, p):
        raise PreconditionViolated(
            "cannot fix a coupling map after a register was added"
        )
    cmap = random_coupling_map(p.circuit.n_qubits, rng)
    record = _record(COUPLING_MAP, coupling_edges=cmap.edges)
    config = replace(p.config, coupling_map=cmap)
    follow = replace(p, config=config, provenance=p.provenance + (record,))
    return follow, record


def apply_change_gate_set(p: Program, rng: Rng) -> tuple[Program, TransformRecord]:
    name = sorted(UNIVERSAL_GATE_SETS)[int(rng.integers(len(UNIVERSAL_GATE_SETS)))]
    record = _record(GATE_SET, gate_set=name)
    config = replace(p.config, target_gate_set=UNIVERSAL_GATE_SETS[name])
    follow = replace(p, config=config, provenance=p.provenance + (record,))
    return follow, record


def apply_change_opt_level(p: Program, rng: Rng) -> tuple[Program, TransformRecord]:
    others = [lvl for lvl in (0, 1, 2, 3) if lvl != p.config.opt_level]
    new_level = others[int(rng.integers(len(others)))]
    record = _record(
        OPT_LEVEL, old_value=str(p.config.opt_level), new_value=str(new_level)
    )
    config = replace(p.config, opt_level=new_level)
    follow = replace(p, config=config, provenance=p.provenance + (record,))
    return follow, record


def apply_change_backend(p: Program, rng: Rng) -> tuple[Program, TransformRecord]:
    others = [b for b in registered_backends() if b != p.config.backend_id]
    if not others:
        raise OnlyOneBackend("change of backend needs >= 2 registered backends")
    new_backend = others[int(rng.integers(len(others)))]
    record = _record(BACKEND, old_value=p.config.backend_id, new_value=new_backend)
    config = replace(p.config, backend_id=new_backend)
    follow = replace(p, config=config, provenance=p.provenance + (record,))
    return follow, record


def _advance(p: Program, circuit: Circuit, record: TransformRecord) -> Program:
    return replace(p, circuit=circuit, provenance=p.provenance + (record,))


# ---------------------------------------------------------------------------
# Chaining
# ---------------------------------------------------------------------------

FollowUp = Program | tuple[Program, Program]

_SAMPLE_CAP = 100


def _applicable(kind: str, p: Program) -> bool:
    if not precondition(kind, p):
        return False
    if kind == INJECT_PARAMS:
        return bool(_literal_positions(p.circuit))
    if kind == BACKEND:
        return len(registered_backends()) >= 2
    return True


def chain_transforms(
    p: Program, policy: TransformChainPolicy, rng: Rng
) -> tuple[FollowUp, list[TransformRecord]]:
    """Sample and apply a random transformation chain.

    Draws how many transformations to apply, then samples kinds uniformly,
    skipping inapplicable ones. A non-semantics-preserving transformation
    ends the chain immediately.
    """
    n_to_apply = int(1 + rng.integers(policy.max_transforms))
    current: Program = p
    records: list[TransformRecord] = []
    samples = 0
    while len(records) < n_to_apply and samples < _SAMPLE_CAP:
        samples += 1
        kind = TRANSFORM_KINDS[int(rng.integers(len(TRANSFORM_KINDS)))]
        if not _applicable(kind, current):
            continue
        if kind == PARTITION:
            part_a, part_b, record = apply_partition(current, rng)
            records.append(record)
            return (part_a, part_b), records
        follow, record = _APPLY[kind](current, rng)
        records.append(record)
        current = follow
        if not record.semantics_preserving:
            break
    return current, records


_APPLY = {
    QUBIT_ORDER: apply_qubit_order,
    NULL_EFFECT: apply_null_effect,
    ADD_REGISTER: apply_add_register,
    INJECT_PARAMS: apply_inject_params,
    QASM_ROUNDTRIP: lambda p, rng: apply_qasm_roundtrip(p),
    COUPLING_MAP: apply_change_coupling_map,
    GATE_SET: apply_change_gate_set,
    OPT_LEVEL: apply_change_opt_level,
    BACKEND: apply_change_backend,
}


# ---------------------------------------------------------------------------
# Record serialization
# ---------------------------------------------------------------------------


def record_to_json(r: TransformRecord) -> dict:
    out: dict = {
        "kind": r.kind,
        "name": r.display_name,
        "semantics_preserving": r.semantics_preserving,
        "relation": r.relation,
    }
    if r.mapping is not None:
        out["mapping"] = list(r.mapping)
    if r.subcircuit is not None:
        out["subcircuit"] = r.subcircuit
    if r.added_clbits is not None:
        out["added_clbits"] = list(r.added_clbits)
    if r.injected is not None:
        out["injected"] = [[name, value] for name, value in r.injected]
    if r.partition_a is not None:
        out["partition_a"] = list(r.partition_a)
        out["partition_b"] = list(r.partition_b)
        out["total_clbits"] = r.total_clbits
    if r.coupling_edges is not None:
        out["coupling_edges"] = [list(e) for e in r.coupling_edges]
    if r.gate_set is not None:
        out["gate_set"] = r.gate_set
    if r.old_value is not None:
        out["old_value"] = r.old_value
        out["new_value"] = r.new_value
    return out


def record_from_json(d: dict) -> TransformRecord:
    try:
        return TransformRecord(
            kind=d["kind"],
            semantics_preserving=d["semantics_preserving"],
            relation=d["relation"],
            mapping=tuple(d["mapping"]) if "mapping" in d else None,
            subcircuit=d.get("subcircuit"),
            added_clbits=tuple(d["added_clbits"]) if "added_clbits" in d else None,
            injected=tuple((n, v) for n, v in d["injected"]) if "injected" in d else None,
            partition_a=tuple(d["partition_a"]) if "partition_a" in d else None,
            partition_b=tuple(d["partition_b"]) if "partition_b" in d else None,
            total_clbits=d.get("total_clbits"),
            coupling_edges=tuple(tuple(e) for e in d["coupling_edges"])
            if "coupling_edges" in d
            else None,
            gate_set=d.get("gate_set"),
            old_value=d.get("old_value"),
            new_value=d.get("new_value"),
        )
    except KeyError as exc:
        raise SchemaMismatch(f"malformed transform record: missing {exc}") from exc
