"""Quantum program representation.

A Circuit is an ordered list of instructions (gates, measurements,
composite subcircuit references) over a quantum and a classical register.
A Program couples a circuit with its execution configuration and parameter
bindings. All types are immutable after construction; validation happens
in the constructors so invalid circuits cannot circulate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .errors import CircuitError, MeasurementNotInvertible
from .gates import INVERSE_NAME_PAIRS, ROTATION_GATES, SELF_INVERSE_GATES, gate_spec

_SYMBOL_RE = re.compile(r"[a-z][a-z0-9_]*\Z")


@dataclass(frozen=True)
class Symbol:
    """A named free parameter, bound to a float before execution."""

    name: str

    def __post_init__(self) -> None:
        if not _SYMBOL_RE.match(self.name):
            raise CircuitError(f"invalid symbol name '{self.name}'")


Param = float | Symbol


@dataclass(frozen=True)
class Gate:
    """Application of a catalog gate to specific qubits."""

    name: str
    qubits: tuple[int, ...]
    params: tuple[Param, ...] = ()


@dataclass(frozen=True)
class Measure:
    qubit: int
    clbit: int


@dataclass(frozen=True)
class Composite:
    """Reference to a named subcircuit, optionally inverted.

    `qubits`/`clbits` map the subcircuit's registers onto the parent's;
    their lengths must equal the subcircuit register sizes.
    """

    ref: str
    qubits: tuple[int, ...]
    clbits: tuple[int, ...] = ()
    inverted: bool = False


Instruction = Gate | Measure | Composite


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    n_clbits: int
    instructions: tuple[Instruction, ...] = ()
    subcircuits: dict[str, "Circuit"] = field(default_factory=dict)

    def __post_init__(self) -> None:
        validate_circuit(self)

    def gate_count(self) -> int:
        return sum(1 for ins in self.instructions if not isinstance(ins, Measure))


def validate_circuit(c: Circuit) -> None:
    """Raise CircuitError on any structural violation.

    Enforced rules: index bounds, distinct qubit arguments, catalog arity and
    parameter counts, composite argument lists matching subcircuit register
    sizes, measurement-free subcircuits, and the measure-last rule (no gate
    touches a qubit after that qubit has been measured).
    """
    if c.n_qubits < 0 or c.n_clbits < 0:
        raise CircuitError("register sizes must be nonnegative")
    for name, sub in c.subcircuits.items():
        if any(isinstance(ins, Measure) for ins in sub.instructions):
            raise CircuitError(f"subcircuit '{name}' must not contain measurements")
    measured: set[int] = set()
    for ins in c.instructions:
        if isinstance(ins, Measure):
            _check_indices(c, (ins.qubit,), (ins.clbit,))
            measured.add(ins.qubit)
            continue
        if isinstance(ins, Gate):
            spec = _lookup(ins.name)
            if len(ins.qubits) != spec.arity:
                raise CircuitError(
                    f"gate '{ins.name}' takes {spec.arity} qubits, got {len(ins.qubits)}"
                )
            if len(ins.params) != spec.param_count:
                raise CircuitError(
                    f"gate '{ins.name}' takes {spec.param_count} parameters, "
                    f"got {len(ins.params)}"
                )
            _check_indices(c, ins.qubits, ())
        else:
            sub = c.subcircuits.get(ins.ref)
            if sub is None:
                raise CircuitError(f"composite references unknown subcircuit '{ins.ref}'")
            if len(ins.qubits) != sub.n_qubits or len(ins.clbits) != sub.n_clbits:
                raise CircuitError(
                    f"composite '{ins.ref}' argument lists do not match the "
                    f"subcircuit's register sizes"
                )
            _check_indices(c, ins.qubits, ins.clbits)
        touched = set(ins.qubits)
        if touched & measured:
            raise CircuitError("gate applied to a qubit after its measurement")


def _lookup(name: str):
    try:
        return gate_spec(name)
    except KeyError as exc:
        raise CircuitError(str(exc)) from None


def _check_indices(c: Circuit, qubits: tuple[int, ...], clbits: tuple[int, ...]) -> None:
    if len(set(qubits)) != len(qubits):
        raise CircuitError(f"duplicate qubit argument in {qubits}")
    for q in qubits:
        if not 0 <= q < c.n_qubits:
            raise CircuitError(f"qubit index {q} out of range for {c.n_qubits} qubits")
    for b in clbits:
        if not 0 <= b < c.n_clbits:
            raise CircuitError(f"clbit index {b} out of range for {c.n_clbits} clbits")


@dataclass(frozen=True)
class CouplingMap:
    """Undirected connectivity graph over physical qubits."""

    n_qubits: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        seen: set[tuple[int, int]] = set()
        for a, b in self.edges:
            if a == b:
                raise CircuitError(f"coupling map contains self-loop on qubit {a}")
            if not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise CircuitError(f"coupling edge ({a},{b}) out of range")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise CircuitError(f"duplicate coupling edge ({a},{b})")
            seen.add(key)
        if not self.is_connected():
            raise CircuitError("coupling map must be a connected graph")

    def is_connected(self) -> bool:
        if self.n_qubits <= 1:
            return True
        adj: dict[int, set[int]] = {i: set() for i in range(self.n_qubits)}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        seen = {0}
        stack = [0]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == self.n_qubits

    def has_edge(self, a: int, b: int) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges


@dataclass(frozen=True)
class ExecConfig:
    """Everything the pipeline needs besides the circuit itself."""

    backend_id: str
    opt_level: int
    shots: int
    seed: int
    coupling_map: CouplingMap | None = None
    target_gate_set: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.opt_level not in (0, 1, 2, 3):
            raise CircuitError(f"optimization level must be 0..3, got {self.opt_level}")
        if self.shots < 1:
            raise CircuitError("shots must be >= 1")
        if self.target_gate_set is not None:
            for name in self.target_gate_set:
                _lookup(name)


@dataclass(frozen=True)
class Program:
    """A circuit plus its execution setting: the unit the campaign tests.

    `provenance` records the transformations applied so far (empty for a
    freshly generated source program). `qasm_roundtrips` counts deferred
    QASM roundtrip passes executed right before simulation.
    """

    circuit: Circuit
    config: ExecConfig
    bindings: dict[str, float] = field(default_factory=dict)
    provenance: tuple = ()
    qasm_roundtrips: int = 0

    def with_circuit(self, circuit: Circuit) -> "Program":
        return replace(self, circuit=circuit)


def free_symbols(c: Circuit) -> set[str]:
    """Names of all unbound symbolic parameters in the circuit."""
    out: set[str] = set()
    for ins in c.instructions:
        if isinstance(ins, Gate):
            out.update(p.name for p in ins.params if isinstance(p, Symbol))
    for sub in c.subcircuits.values():
        out |= free_symbols(sub)
    return out


def substitute_params(c: Circuit, bindings: dict[str, float]) -> Circuit:
    """Replace bound symbols with their literal values (unbound ones stay)."""
    new_instrs = []
    for ins in c.instructions:
        if isinstance(ins, Gate) and any(isinstance(p, Symbol) for p in ins.params):
            params = tuple(
                bindings.get(p.name, p) if isinstance(p, Symbol) else p
                for p in ins.params
            )
            ins = replace(ins, params=params)
        new_instrs.append(ins)
    subs = {k: substitute_params(v, bindings) for k, v in c.subcircuits.items()}
    return Circuit(c.n_qubits, c.n_clbits, tuple(new_instrs), subs)


def inverse_gate(g: Gate) -> list[Gate]:
    """Inverse of a single catalog gate as a short gate sequence."""
    if g.name in SELF_INVERSE_GATES:
        return [g]
    if g.name in INVERSE_NAME_PAIRS:
        return [replace(g, name=INVERSE_NAME_PAIRS[g.name])]
    if g.name in ROTATION_GATES:
        return [replace(g, params=(_negate(g.params[0]),))]
    if g.name == "u":
        t, p, l = g.params
        return [replace(g, params=(_negate(t), _negate(l), _negate(p)))]
    if g.name == "cu":
        t, p, l, gm = g.params
        return [replace(g, params=(_negate(t), _negate(l), _negate(p), _negate(gm)))]
    if g.name == "sx":
        # sx^-1 = sx . x applied in circuit order sx, x
        return [g, Gate("x", g.qubits)]
    if g.name == "c3sx":
        return [g, Gate("c3x", g.qubits)]
    raise CircuitError(f"no inverse rule for gate '{g.name}'")


def _negate(p: Param) -> float:
    if isinstance(p, Symbol):
        raise CircuitError(f"cannot invert a gate with unbound symbol '{p.name}'")
    return -p


def inverse_circuit(c: Circuit) -> Circuit:
    """Reverse the circuit and invert every instruction.

    Composing the result after the original yields the identity map.
    """
    out: list[Instruction] = []
    for ins in reversed(c.instructions):
        if isinstance(ins, Measure):
            raise MeasurementNotInvertible("cannot invert a circuit with measurements")
        if isinstance(ins, Composite):
            out.append(replace(ins, inverted=not ins.inverted))
        else:
            out.extend(inverse_gate(ins))
    return Circuit(c.n_qubits, c.n_clbits, tuple(out), dict(c.subcircuits))


def flatten(c: Circuit) -> Circuit:
    """Inline all composite instructions into plain gates and measures."""
    out: list[Instruction] = []
    for ins in c.instructions:
        if not isinstance(ins, Composite):
            out.append(ins)
            continue
        sub = c.subcircuits[ins.ref]
        body = flatten(inverse_circuit(sub) if ins.inverted else sub)
        for b in body.instructions:
            if isinstance(b, Measure):  # unreachable: subcircuits are measure-free
                raise CircuitError("measurement inside composite body")
            if isinstance(b, Gate):
                out.append(replace(b, qubits=tuple(ins.qubits[q] for q in b.qubits)))
    return Circuit(c.n_qubits, c.n_clbits, tuple(out), {})


def interaction_components(c: Circuit) -> list[set[int]]:
    """Connected components of the qubit co-occurrence graph.

    Qubits are linked when they appear together in any multi-qubit gate or
    composite instruction; singleton qubits form their own components.
    """
    parent = list(range(c.n_qubits))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for ins in c.instructions:
        if isinstance(ins, Measure):
            continue
        qs = ins.qubits
        for other in qs[1:]:
            union(qs[0], other)
    groups: dict[int, set[int]] = {}
    for q in range(c.n_qubits):
        groups.setdefault(find(q), set()).add(q)
    return sorted(groups.values(), key=min)


def measurement_wiring(c: Circuit) -> list[tuple[int, int]]:
    """(qubit, clbit) pairs of all measurements in instruction order."""
    return [(ins.qubit, ins.clbit) for ins in c.instructions if isinstance(ins, Measure)]
