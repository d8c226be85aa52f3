"""Simulator backends and the end-to-end execution pipeline.

Two independently implemented backends are registered:

  sv-dense    matrix-free statevector simulation (tensordot kernel),
              up to 14 qubits.
  sv-unitary  explicit accumulation of the full circuit unitary with a
              strided block kernel. Accumulating 2^n x 2^n matrices is
              memory-bound (a single 11-qubit gate application moves
              ~270 MB), so this backend caps at 10 qubits.

execute() runs the whole pipeline (bind, translate, route, optimize,
deferred QASM roundtrips, simulate, sample) and converts any failure into
a structured crash outcome instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import defects, qasm
from .circuit import (
    Circuit,
    Measure,
    Program,
    Symbol,
    flatten,
    free_symbols,
    measurement_wiring,
    substitute_params,
)
from .errors import BackendError, MorphqError, QubitLimitExceeded, UnboundParameter
from .gates import gate_spec
from .linalg import (
    apply_gate_rows,
    apply_gate_tensordot,
    statevector_norm_error,
    zero_state,
)
from .transpile import optimize, route_to_coupling_map, translate_to_gate_set

Statevector = np.ndarray

EXECUTION_PHASES = ("transpile", "translate", "route", "optimize", "qasm", "simulate")


@dataclass(frozen=True)
class OutputDistribution:
    """Measured bit-string counts; keys all share one length.

    Counts are integers for sampled distributions; the partitioned-execution
    product produces fractional counts (renormalized), so floats are allowed.
    """

    counts: dict[str, float]
    shots: float

    def __post_init__(self) -> None:
        lengths = {len(k) for k in self.counts}
        if len(lengths) > 1:
            raise BackendError(f"mixed bit-string lengths in distribution: {lengths}")

    def key_length(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def probabilities(self) -> dict[str, float]:
        total = float(self.shots)
        return {k: v / total for k, v in self.counts.items()}


@dataclass(frozen=True)
class Success:
    distribution: OutputDistribution

    @property
    def ok(self) -> bool:
        return True


@dataclass(frozen=True)
class Crash:
    phase: str
    message: str

    def __post_init__(self) -> None:
        if self.phase not in EXECUTION_PHASES:
            raise ValueError(f"unknown execution phase '{self.phase}'")
        if not self.message:
            raise ValueError("crash message must be nonempty")

    @property
    def ok(self) -> bool:
        return False


ExecutionOutcome = Success | Crash


@dataclass(frozen=True)
class BackendInfo:
    backend_id: str
    max_qubits: int
    fast_max_qubits: int  # generator draw budget; <= max_qubits


_BACKENDS = {
    "sv-dense": BackendInfo("sv-dense", max_qubits=14, fast_max_qubits=14),
    "sv-unitary": BackendInfo("sv-unitary", max_qubits=10, fast_max_qubits=10),
}


def registered_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def backend_info(backend_id: str) -> BackendInfo:
    try:
        return _BACKENDS[backend_id]
    except KeyError:
        raise BackendError(f"unknown backend '{backend_id}'") from None


def generator_backend_choices(choices: tuple[str, ...], n_qubits: int) -> tuple[str, ...]:
    """Backends from `choices` whose fast-path budget covers the register."""
    fitting = tuple(b for b in choices if backend_info(b).fast_max_qubits >= n_qubits)
    if not fitting:
        raise BackendError(
            f"no backend in {list(choices)} can simulate {n_qubits} qubits"
        )
    return fitting


def _gate_matrix(ins) -> np.ndarray:
    params = []
    for p in ins.params:
        if isinstance(p, Symbol):
            raise UnboundParameter(
                f"unbound parameter '{p.name}' in gate '{ins.name}' at simulation time"
            )
        params.append(float(p))
    return gate_spec(ins.name).matrix(tuple(params))


def _simulate_dense(c: Circuit) -> Statevector:
    state = zero_state(c.n_qubits)
    for ins in flatten(c).instructions:
        if isinstance(ins, Measure):
            continue
        state = apply_gate_tensordot(state, _gate_matrix(ins), ins.qubits, c.n_qubits)
    return state


def _simulate_unitary(c: Circuit) -> Statevector:
    unitary = np.eye(2**c.n_qubits, dtype=complex)
    for ins in flatten(c).instructions:
        if isinstance(ins, Measure):
            continue
        apply_gate_rows(unitary, _gate_matrix(ins), ins.qubits, c.n_qubits)
    return np.ascontiguousarray(unitary[:, 0])


def simulate(c: Circuit, backend_id: str) -> Statevector:
    """Statevector of the circuit's gate prefix applied to |0...0>.

    Measurements are ignored here; sampling handles them. Raises
    UnboundParameter for leftover symbols and QubitLimitExceeded beyond the
    backend cap.
    """
    info = backend_info(backend_id)
    if c.n_qubits > info.max_qubits:
        raise QubitLimitExceeded(
            f"backend '{backend_id}' supports at most {info.max_qubits} qubits, "
            f"circuit has {c.n_qubits}"
        )
    missing = free_symbols(c)
    if missing:
        raise UnboundParameter(
            f"unbound parameter '{sorted(missing)[0]}' at simulation time"
        )
    state = _simulate_dense(c) if backend_id == "sv-dense" else _simulate_unitary(c)
    err = statevector_norm_error(state)
    if err > 1e-9:
        raise BackendError(f"statevector norm drifted by {err:.2e}")
    return state


def render_key(clbit_values: list[int]) -> str:
    """Fixed bit-string rendering: leftmost character is the highest clbit."""
    return "".join(str(clbit_values[i]) for i in reversed(range(len(clbit_values))))


def _basis_key(basis: int, wiring: list[tuple[int, int]], n_clbits: int) -> str:
    values = [0] * n_clbits
    for qubit, clbit in wiring:
        values[clbit] = (basis >> qubit) & 1
    return render_key(values)


def sample(
    sv: Statevector,
    wiring: list[tuple[int, int]],
    n_clbits: int,
    shots: int,
    rng: np.random.Generator,
) -> OutputDistribution:
    """Draw `shots` i.i.d. basis states and render them through the wiring."""
    if shots < 1:
        raise BackendError("shots must be >= 1")
    probs = np.abs(sv) ** 2
    probs = probs / probs.sum()
    draws = rng.multinomial(shots, probs)
    counts: dict[str, int] = {}
    for basis in np.nonzero(draws)[0]:
        key = _basis_key(int(basis), wiring, n_clbits)
        counts[key] = counts.get(key, 0) + int(draws[basis])
    return OutputDistribution(counts, shots)


def exact_output_probabilities(c: Circuit, backend_id: str = "sv-dense") -> dict[str, float]:
    """Analytic measurement distribution (no sampling noise)."""
    sv = simulate(c, backend_id)
    probs = np.abs(sv) ** 2
    wiring = measurement_wiring(c)
    out: dict[str, float] = {}
    for basis in np.nonzero(probs > 1e-18)[0]:
        key = _basis_key(int(basis), wiring, c.n_clbits)
        out[key] = out.get(key, 0.0) + float(probs[basis])
    return out


def _bind_phase(p: Program) -> Circuit:
    """Substitute bindings into the circuit (pre-transpile binding)."""
    if defects.enabled(defects.STRICT_BIND_CHECK):
        present = free_symbols(p.circuit)
        extra = sorted(set(p.bindings) - present)
        if extra:
            raise BackendError(
                f"Cannot bind parameters not present in the circuit: '{extra[0]}'"
            )
    return substitute_params(p.circuit, p.bindings)


def prepare_circuit(p: Program) -> Circuit:
    """Run every pipeline stage except simulation and sampling."""
    c = _bind_phase(p)
    if p.config.target_gate_set is not None:
        c = translate_to_gate_set(c, p.config.target_gate_set)
    if p.config.coupling_map is not None:
        c = route_to_coupling_map(c, p.config.coupling_map)
    c = optimize(c, p.config.opt_level)
    for _ in range(p.qasm_roundtrips):
        c = qasm.parse(qasm.emit(c))
    return c


def execute(p: Program) -> ExecutionOutcome:
    """Full pipeline; every failure becomes a structured crash outcome."""
    phase = "transpile"
    try:
        c = _bind_phase(p)
        if p.config.target_gate_set is not None:
            phase = "translate"
            c = translate_to_gate_set(c, p.config.target_gate_set)
        if p.config.coupling_map is not None:
            phase = "route"
            c = route_to_coupling_map(c, p.config.coupling_map)
        phase = "optimize"
        c = optimize(c, p.config.opt_level)
        phase = "qasm"
        for _ in range(p.qasm_roundtrips):
            c = qasm.parse(qasm.emit(c))
        phase = "simulate"
        sv = simulate(c, p.config.backend_id)
        rng = np.random.default_rng(p.config.seed)
        dist = sample(sv, measurement_wiring(c), c.n_clbits, p.config.shots, rng)
        return Success(dist)
    except Exception as exc:  # deliberate: crashes are data, not control flow
        return Crash(phase, f"{type(exc).__name__}: {exc}")


def exact_distribution(p: Program) -> dict[str, float]:
    """Exact pipeline distribution for oracle checks (errors propagate)."""
    c = prepare_circuit(p)
    return exact_output_probabilities(c, "sv-dense")
