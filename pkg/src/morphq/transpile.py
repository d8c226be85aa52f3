"""Mini-transpiler: gate-set translation, coupling-map routing, optimization.

Translation is a finite two-stage rewrite with no search: every catalog
gate lowers exactly to the {u, cx} intermediate basis (numeric ZYZ / ABC
decompositions, multi-controls by recursion), then {u, cx} lowers to the
requested universal set. Totality over the catalog is a contract; a
missing rule is a hard error, never a timeout.

Routing inserts SWAPs greedily along shortest paths and rewires the final
measurements, so the observable distribution is unchanged.

Optimization levels stack four passes: identity removal and
adjacent-inverse cancellation (level 1), rotation merging (level 2), and
commutation-aware cancellation (level 3). Gate count never increases.
"""

from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import defects
from .circuit import (
    Circuit,
    Composite,
    CouplingMap,
    Gate,
    Instruction,
    Measure,
    Symbol,
    flatten,
    inverse_gate,
)
from .errors import BackendError, MapTooSmall, NoDecompositionRule
from .gates import ROTATION_GATES, gate_spec
from .linalg import embed_gate

# The three bundled universal gate sets.
UNIVERSAL_GATE_SETS: dict[str, tuple[str, ...]] = {
    "U1": ("rx", "ry", "rz", "p", "cx"),
    "U2": ("h", "rz", "cx"),
    "U3": ("u", "cx"),
}


def gate_set_name(target: tuple[str, ...]) -> str:
    for name, gates in UNIVERSAL_GATE_SETS.items():
        if tuple(target) == gates:
            return name
    raise BackendError(f"unsupported target gate set {list(target)}")


# ---------------------------------------------------------------------------
# Single-qubit decompositions
# ---------------------------------------------------------------------------


def zyz_angles(mat: np.ndarray) -> tuple[float, float, float, float]:
    """Decompose a 2x2 unitary as e^{i phase} Rz(phi) Ry(theta) Rz(lam).

    Angles come from phase-free products of matrix entries, so no branch
    of the complex argument needs to be guessed.
    """
    c = abs(mat[0, 0])
    s = abs(mat[1, 0])
    theta = 2.0 * math.atan2(s, c)
    if s < 1e-12:  # diagonal: theta ~ 0
        lam = 0.0
        phi = cmath.phase(mat[1, 1] * mat[0, 0].conjugate())
        phase = cmath.phase(mat[0, 0]) + phi / 2.0
    elif c < 1e-12:  # anti-diagonal: theta ~ pi
        lam = 0.0
        phi = cmath.phase(-mat[1, 0] * mat[0, 1].conjugate())
        phase = cmath.phase(mat[1, 0]) - phi / 2.0
    else:
        phi = cmath.phase(mat[1, 0] * mat[0, 0].conjugate())
        lam = -cmath.phase(mat[1, 0] * mat[1, 1].conjugate())
        phase = cmath.phase(mat[1, 1]) - (phi + lam) / 2.0
    err = _zyz_error(mat, theta, phi, lam, phase)
    if err > 1e-9:
        raise BackendError(f"ZYZ decomposition failed (residual {err:.2e})")
    return theta, phi, lam, phase


def _zyz_error(mat, theta, phi, lam, phase) -> float:
    from .gates import ry_matrix, rz_matrix

    recon = cmath.exp(1j * phase) * (rz_matrix(phi) @ ry_matrix(theta) @ rz_matrix(lam))
    return float(np.abs(recon - mat).max())


def u_gate_of(mat: np.ndarray, qubit: int) -> tuple[Gate, float]:
    """Express a 2x2 unitary as a u gate plus a residual global phase."""
    theta, phi, lam, phase = zyz_angles(mat)
    return Gate("u", (qubit,), (theta, phi, lam)), phase - 0.5 * (phi + lam)


def _abc_controlled(mat: np.ndarray, control: int, target: int) -> list[Gate]:
    """Controlled-U as single-qubit gates plus two CX (exact, ABC scheme)."""
    from .gates import ry_matrix, rz_matrix

    theta, phi, lam, alpha = zyz_angles(mat)
    a = rz_matrix(phi) @ ry_matrix(theta / 2)
    b = ry_matrix(-theta / 2) @ rz_matrix(-(phi + lam) / 2)
    c = rz_matrix((lam - phi) / 2)
    seq = [
        _u_or_skip(c, target),
        Gate("cx", (control, target)),
        _u_or_skip(b, target),
        Gate("cx", (control, target)),
        _u_or_skip(a, target),
    ]
    if abs(alpha) > 1e-15:
        seq.append(Gate("u", (control,), (0.0, 0.0, alpha)))  # p(alpha) on control
    return [g for g in seq if g is not None]


def _u_or_skip(mat: np.ndarray, qubit: int) -> Gate | None:
    if np.abs(mat - np.eye(2)).max() < 1e-15:
        return None
    gate, _ = u_gate_of(mat, qubit)
    return gate


def _sqrt_unitary(mat: np.ndarray) -> np.ndarray:
    """Principal square root of a 2x2 unitary via eigendecomposition."""
    vals, vecs = np.linalg.eig(mat)
    roots = np.exp(0.5j * np.angle(vals))
    return vecs @ np.diag(roots) @ np.linalg.inv(vecs)


def _multi_controlled(mat: np.ndarray, controls: tuple[int, ...], target: int) -> list[Gate]:
    """C^k(U) by the standard sqrt recursion; exact for any k >= 1."""
    if len(controls) == 1:
        return _abc_controlled(mat, controls[0], target)
    v = _sqrt_unitary(mat)
    v_dg = v.conj().T
    rest, last = controls[:-1], controls[-1]
    seq = _abc_controlled(v, last, target)
    seq += _multi_controlled(_X_MAT, rest, last)
    seq += _abc_controlled(v_dg, last, target)
    seq += _multi_controlled(_X_MAT, rest, last)
    seq += _multi_controlled(v, rest, target)
    return seq


_X_MAT = np.array([[0, 1], [1, 0]], dtype=complex)

# Catalog gates that are a single controlled 1-qubit gate. Values give the
# control count; the base matrix comes from the spec with controls stripped.
_CONTROLLED_GATES = {
    "cy": 1, "cz": 1, "ch": 1, "crx": 1, "cry": 1, "crz": 1, "cp": 1, "cu": 1,
    "ccx": 2, "c3x": 3, "c3sx": 3, "c4x": 4,
}


def _base_matrix(g: Gate, n_controls: int) -> np.ndarray:
    full = gate_spec(g.name).matrix(tuple(float(p) for p in g.params))
    dim = full.shape[0] >> n_controls
    cmask = (1 << n_controls) - 1
    base = np.empty((dim, dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            base[i, j] = full[(i << n_controls) | cmask, (j << n_controls) | cmask]
    return base


def _lower_to_u_cx(g: Gate) -> list[Gate]:
    """Stage 1: rewrite one catalog gate into the {u, cx} basis."""
    name = g.name
    if name == "cx":
        return [g]
    if name == "id":
        if defects.enabled(defects.TRANSLATE_MISSING_ID_RULE):
            raise NoDecompositionRule(
                "no decomposition rule for gate 'id': instruction not found in "
                "the translation table"
            )
        return []
    spec = gate_spec(name)
    if spec.arity == 1:
        gate, _ = u_gate_of(spec.matrix(tuple(float(p) for p in g.params)), g.qubits[0])
        return [gate]
    if name == "swap":
        a, b = g.qubits
        return [Gate("cx", (a, b)), Gate("cx", (b, a)), Gate("cx", (a, b))]
    if name == "cswap":
        c, a, b = g.qubits
        inner = Gate("ccx", (c, a, b))
        return [Gate("cx", (b, a)), *_lower_to_u_cx(inner), Gate("cx", (b, a))]
    if name in _CONTROLLED_GATES:
        k = _CONTROLLED_GATES[name]
        base = _base_matrix(g, k)
        controls, target = g.qubits[:k], g.qubits[k]
        return _multi_controlled(base, controls, target)
    if name in ("rxx", "ryy", "rzz", "rzx"):
        return _lower_pauli_rotation(g)
    raise NoDecompositionRule(f"no decomposition rule for gate '{name}'")


def _lower_pauli_rotation(g: Gate) -> list[Gate]:
    """Two-qubit Pauli rotations via conjugated RZZ = CX . Rz(target) . CX."""
    theta = float(g.params[0])
    q0, q1 = g.qubits
    core = [
        Gate("cx", (q0, q1)),
        Gate("u", (q1,), (0.0, 0.0, theta)),  # p(theta) = rz up to global phase
        Gate("cx", (q0, q1)),
    ]
    h0, _ = u_gate_of(gate_spec("h").matrix(), q0)
    h1, _ = u_gate_of(gate_spec("h").matrix(), q1)
    if g.name == "rzz":
        return core
    if g.name == "rzx":
        return [h1, *core, h1]
    if g.name == "rxx":
        return [h0, h1, *core, h0, h1]
    # ryy: conjugate both qubits by rx(pi/2)
    rx_f = [u_gate_of(gate_spec("rx").matrix((math.pi / 2,)), q)[0] for q in (q0, q1)]
    rx_b = [u_gate_of(gate_spec("rx").matrix((-math.pi / 2,)), q)[0] for q in (q0, q1)]
    return [*rx_f, *core, *rx_b]


def _lower_u_to_target(g: Gate, target: tuple[str, ...]) -> list[Gate]:
    """Stage 2: rewrite a {u, cx} gate into the requested universal set."""
    if g.name in target:
        return [g]
    assert g.name == "u", f"stage-1 output contained '{g.name}'"
    theta, phi, lam = (float(p) for p in g.params)
    q = g.qubits[0]
    if "ry" in target:  # U1
        return [Gate("rz", (q,), (lam,)), Gate("ry", (q,), (theta,)), Gate("rz", (q,), (phi,))]
    if "h" in target:  # U2: ry(t) = rz(pi/2) h rz(t) h rz(-pi/2)
        return [
            Gate("rz", (q,), (lam,)),
            Gate("rz", (q,), (-math.pi / 2,)),
            Gate("h", (q,)),
            Gate("rz", (q,), (theta,)),
            Gate("h", (q,)),
            Gate("rz", (q,), (math.pi / 2,)),
            Gate("rz", (q,), (phi,)),
        ]
    raise NoDecompositionRule(f"no rule lowering 'u' into {list(target)}")


def translate_to_gate_set(c: Circuit, target: tuple[str, ...]) -> Circuit:
    """Rewrite the circuit to use only gates from a registered universal set.

    Composites are inlined first. The output is unitarily equivalent to the
    input up to global phase (within 1e-7, checked by tests across the whole
    catalog).
    """
    gate_set_name(target)
    flat = flatten(c)
    out: list[Instruction] = []
    for ins in flat.instructions:
        if isinstance(ins, Measure):
            out.append(ins)
            continue
        if ins.name in target and not (
            ins.name == "id" and defects.enabled(defects.TRANSLATE_MISSING_ID_RULE)
        ):
            out.append(ins)
            continue
        _require_bound(ins)
        for lowered in _lower_to_u_cx(ins):
            out.extend(_lower_u_to_target(lowered, target))
    return Circuit(c.n_qubits, c.n_clbits, tuple(out), {})


def _require_bound(g: Gate) -> None:
    for p in g.params:
        if isinstance(p, Symbol):
            raise BackendError(
                f"cannot translate gate '{g.name}' with unbound symbol '{p.name}'"
            )


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------


def _shortest_path(cmap: CouplingMap, src: int, dst: int) -> list[int]:
    adj: dict[int, list[int]] = {i: [] for i in range(cmap.n_qubits)}
    for a, b in cmap.edges:
        adj[a].append(b)
        adj[b].append(a)
    for neighbors in adj.values():
        neighbors.sort()
    prev: dict[int, int] = {src: src}
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        if cur == dst:
            break
        for nxt in adj[cur]:
            if nxt not in prev:
                prev[nxt] = cur
                queue.append(nxt)
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def route_to_coupling_map(c: Circuit, cmap: CouplingMap) -> Circuit:
    """Make every 2-qubit gate act on a coupling edge via greedy SWAPs.

    Gates on 3+ qubits are lowered to {u, cx} first. The final
    logical-to-physical placement rewires the trailing measurements.
    """
    if cmap.n_qubits < c.n_qubits:
        raise MapTooSmall(
            f"coupling map covers {cmap.n_qubits} qubits but the circuit "
            f"uses {c.n_qubits}"
        )
    flat = flatten(c)
    prepared: list[Instruction] = []
    for ins in flat.instructions:
        if isinstance(ins, Gate) and len(ins.qubits) > 2:
            _require_bound(ins)
            prepared.extend(_lower_to_u_cx(ins))
        else:
            prepared.append(ins)

    n_phys = cmap.n_qubits
    l2p = list(range(n_phys))
    p2l = list(range(n_phys))

    def do_swap(pa: int, pb: int) -> None:
        la, lb = p2l[pa], p2l[pb]
        p2l[pa], p2l[pb] = lb, la
        l2p[la], l2p[lb] = pb, pa

    out: list[Instruction] = []
    measures: list[Measure] = []
    for ins in prepared:
        if isinstance(ins, Measure):
            measures.append(ins)
            continue
        if len(ins.qubits) == 1:
            out.append(replace(ins, qubits=(l2p[ins.qubits[0]],)))
            continue
        a, b = ins.qubits
        pa, pb = l2p[a], l2p[b]
        if not cmap.has_edge(pa, pb):
            path = _shortest_path(cmap, pa, pb)
            for step in path[1:-1]:
                out.append(Gate("swap", (l2p[a], step)))
                do_swap(l2p[a], step)
        out.append(replace(ins, qubits=(l2p[a], l2p[b])))
    for m in measures:
        out.append(Measure(l2p[m.qubit], m.clbit))
    return Circuit(n_phys, c.n_clbits, tuple(out), {})


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------

PASS_NAMES = (
    "identity-gate-removal",
    "adjacent-inverse-cancellation",
    "rotation-merging",
    "commutation-aware-cancellation",
)


@dataclass(frozen=True)
class PassPipeline:
    """Ordered passes for one optimization level; higher levels stack more."""

    level: int
    passes: tuple[str, ...]


def pipeline_for_level(level: int) -> PassPipeline:
    if level == 0:
        return PassPipeline(0, ())
    if level == 1:
        return PassPipeline(1, PASS_NAMES[:2])
    if level == 2:
        return PassPipeline(2, PASS_NAMES[:3])
    return PassPipeline(3, PASS_NAMES)


def _is_symbolic(ins: Instruction) -> bool:
    return isinstance(ins, Gate) and any(isinstance(p, Symbol) for p in ins.params)


def _single_gate_inverse(g: Gate) -> Gate | None:
    try:
        inv = inverse_gate(g)
    except Exception:
        return None
    return inv[0] if len(inv) == 1 else None


def _cancels(a: Instruction, b: Instruction) -> bool:
    if not (isinstance(a, Gate) and isinstance(b, Gate)):
        return False
    if a.qubits != b.qubits or _is_symbolic(a) or _is_symbolic(b):
        return False
    inv = _single_gate_inverse(a)
    return inv is not None and inv.name == b.name and inv.params == b.params


def _next_on_same_qubits(instrs: list, i: int):
    """Index of the next instruction overlapping instrs[i], or None."""
    qubits = set(instrs[i].qubits) if not isinstance(instrs[i], Measure) else {instrs[i].qubit}
    for j in range(i + 1, len(instrs)):
        ins = instrs[j]
        other = {ins.qubit} if isinstance(ins, Measure) else set(ins.qubits)
        if qubits & other:
            return j
    return None


def _pass_identity_removal(instrs: list) -> list:
    return [ins for ins in instrs if not (isinstance(ins, Gate) and ins.name == "id")]


def _pass_adjacent_inverse(instrs: list) -> list:
    # A cancellation only creates new adjacency at the deletion point, so
    # stepping back one position after each cancel reaches the fixpoint.
    i = 0
    while i < len(instrs):
        ins = instrs[i]
        if isinstance(ins, Measure):
            i += 1
            continue
        j = _next_on_same_qubits(instrs, i)
        if j is not None and _cancels(ins, instrs[j]):
            del instrs[j]
            del instrs[i]
            i = max(i - 1, 0)
            continue
        i += 1
    return instrs


def _pass_rotation_merge(instrs: list) -> list:
    i = 0
    while i < len(instrs):
        ins = instrs[i]
        if (
            not isinstance(ins, Gate)
            or ins.name not in ROTATION_GATES
            or _is_symbolic(ins)
        ):
            i += 1
            continue
        j = _next_on_same_qubits(instrs, i)
        other = instrs[j] if j is not None else None
        if (
            isinstance(other, Gate)
            and other.name == ins.name
            and other.qubits == ins.qubits
            and not _is_symbolic(other)
        ):
            merged = float(ins.params[0]) + float(other.params[0])
            del instrs[j]
            if merged == 0.0:
                del instrs[i]
                i = max(i - 1, 0)
            else:
                instrs[i] = replace(ins, params=(merged,))
                # stay at i: the merged rotation may merge again
            continue
        i += 1
    return instrs


_COMMUTE_SPAN_LIMIT = 6


def _instruction_matrix(ins: Gate) -> np.ndarray:
    return gate_spec(ins.name).matrix(tuple(float(p) for p in ins.params))


@lru_cache(maxsize=65536)
def _commute_matrices(desc_a, desc_b) -> bool:
    """Matrix commutator check on the union span (descriptors are relative)."""
    name_a, params_a, qubits_a = desc_a
    name_b, params_b, qubits_b = desc_b
    n = len(set(qubits_a) | set(qubits_b))
    ma = embed_gate(gate_spec(name_a).matrix(params_a), qubits_a, n)
    mb = embed_gate(gate_spec(name_b).matrix(params_b), qubits_b, n)
    return bool(np.abs(ma @ mb - mb @ ma).max() < 1e-10)


def _commute(a: Instruction, b: Instruction) -> bool:
    """Conservative commutation test used by the level-3 pass."""
    if isinstance(a, Measure) or isinstance(b, Measure):
        return False
    qa, qb = set(a.qubits), set(b.qubits)
    if not qa & qb:
        return True
    for side in (a, b):
        if isinstance(side, Composite):
            span = len(side.qubits)
            if defects.enabled(defects.COMMUTATION_DIM_OVERFLOW) and 3 * span > 32:
                raise BackendError(
                    f"too many subscripts in einsum: commutation analysis of a "
                    f"{span}-qubit block needs {3 * span} tensor dimensions "
                    f"(maximum supported is 32)"
                )
            return False  # composite blocks act as analysis barriers
        if _is_symbolic(side):
            return False
    union = sorted(qa | qb)
    if len(union) > _COMMUTE_SPAN_LIMIT:
        return False
    local = {q: i for i, q in enumerate(union)}
    desc_a = (a.name, tuple(float(p) for p in a.params), tuple(local[q] for q in a.qubits))
    desc_b = (b.name, tuple(float(p) for p in b.params), tuple(local[q] for q in b.qubits))
    return _commute_matrices(desc_a, desc_b)


def _pass_commutation_cancel(instrs: list) -> list:
    i = 0
    while i < len(instrs):
        ins = instrs[i]
        if isinstance(ins, (Measure, Composite)) or _is_symbolic(ins):
            i += 1
            continue
        cancelled = False
        j = i + 1
        while j < len(instrs):
            other = instrs[j]
            if isinstance(other, Gate) and _cancels(ins, other):
                del instrs[j]
                del instrs[i]
                cancelled = True
                break
            if not _commute(ins, other):
                break
            j += 1
        i = max(i - 1, 0) if cancelled else i + 1
    return instrs


def optimize(c: Circuit, level: int) -> Circuit:
    """Apply the pass pipeline for the level. Gate count never increases."""
    pipeline = pipeline_for_level(level)
    instrs = list(c.instructions)
    for name in pipeline.passes:
        if name == "identity-gate-removal":
            instrs = _pass_identity_removal(instrs)
        elif name == "adjacent-inverse-cancellation":
            instrs = _pass_adjacent_inverse(instrs)
        elif name == "rotation-merging":
            instrs = _pass_rotation_merge(instrs)
        else:
            instrs = _pass_commutation_cancel(instrs)
    kept_refs = {ins.ref for ins in instrs if isinstance(ins, Composite)}
    subs = {k: v for k, v in c.subcircuits.items() if k in kept_refs}
    return Circuit(c.n_qubits, c.n_clbits, tuple(instrs), subs)
