"""Random program generation.

Programs follow a fixed template: a quantum and a classical register of the
same size, a grammar-generated gate sequence, then a full-register
measurement. The execution setting starts with no coupling map and no
target gate set; the optimization level and backend are drawn from the
configured choices. Generation is deterministic given (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, ExecConfig, Gate, Instruction, Measure, Program
from .gates import build_gate_catalog

TWO_PI = 2.0 * math.pi

Rng = np.random.Generator


def new_rng(seed: int) -> Rng:
    """Deterministic generator; identical seed gives a bit-identical stream."""
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class FixedShots:
    shots: int


@dataclass(frozen=True)
class EstimatedShots:
    """Confidence-interval shot sizing with a hard floor of 1024.

    shots = max(1024, ceil(z^2 * p * (1 - p) / eps^2)) where p is the
    per-outcome probability 1/2^n clamped to [0.01, 0.5].
    """

    z: float = 1.96
    eps: float = 0.05


ShotPolicy = FixedShots | EstimatedShots


@dataclass(frozen=True)
class GenConfig:
    min_qubits: int = 1
    max_qubits: int = 11
    max_gates: int = 30
    opt_level_choices: tuple[int, ...] = (0, 1, 2, 3)
    backend_choices: tuple[str, ...] = ("sv-dense", "sv-unitary")
    shots_policy: ShotPolicy = field(default_factory=EstimatedShots)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.min_qubits <= self.max_qubits:
            raise ValueError("need 1 <= min_qubits <= max_qubits")
        if self.max_gates < 1:
            raise ValueError("max_gates must be >= 1")
        if not self.opt_level_choices or not self.backend_choices:
            raise ValueError("opt_level_choices and backend_choices must be nonempty")


def estimate_shots(circuit: Circuit, policy: ShotPolicy) -> int:
    """Shot count for a circuit under the given policy."""
    if isinstance(policy, FixedShots):
        return max(1, policy.shots)
    p = min(0.5, max(0.01, 1.0 / 2**circuit.n_qubits))
    needed = math.ceil(policy.z**2 * p * (1.0 - p) / policy.eps**2)
    return max(1024, needed)


def draw_gate_sequence(n_qubits: int, count: int, rng: Rng) -> list[Gate]:
    """Draw exactly `count` random gates that fit an n-qubit register."""
    catalog = build_gate_catalog()
    eligible = sorted(
        (spec for spec in catalog.values() if spec.arity <= n_qubits),
        key=lambda s: s.name,
    )
    ops: list[Gate] = []
    for _ in range(count):
        spec = eligible[int(rng.integers(len(eligible)))]
        qubits = tuple(int(q) for q in rng.choice(n_qubits, size=spec.arity, replace=False))
        params = tuple(float(v) for v in rng.uniform(0.0, TWO_PI, size=spec.param_count))
        ops.append(Gate(spec.name, qubits, params))
    return ops


def expand_gate_ops(n_qubits: int, max_gates: int, rng: Rng) -> list[Instruction]:
    """Grammar expansion: a random sequence of gate instructions.

    Each instruction draws a catalog gate whose arity fits the register,
    distinct target qubits, and fresh literal angles in [0, 2*pi). The
    sequence length is uniform over 0..max_gates. No measurements are
    emitted.
    """
    n_gates = int(rng.integers(0, max_gates + 1))
    return list(draw_gate_sequence(n_qubits, n_gates, rng))


def generate_program(cfg: GenConfig, rng: Rng | None = None) -> Program:
    """Generate one valid source program.

    The circuit is structurally valid by construction (arity-respecting
    gates, measure-all last), so it executes without crashing on the drawn
    backend. Backends are drawn only among those whose fast-path qubit
    budget covers the register, which keeps single runs desk-scale.
    """
    from .backend import generator_backend_choices  # avoid import cycle at load

    if rng is None:
        rng = new_rng(cfg.seed)
    n_qubits = int(rng.integers(cfg.min_qubits, cfg.max_qubits + 1))
    ops = expand_gate_ops(n_qubits, cfg.max_gates, rng)
    ops.extend(Measure(q, q) for q in range(n_qubits))
    circuit = Circuit(n_qubits, n_qubits, tuple(ops))

    opt_level = int(cfg.opt_level_choices[int(rng.integers(len(cfg.opt_level_choices)))])
    backends = generator_backend_choices(cfg.backend_choices, n_qubits)
    backend_id = backends[int(rng.integers(len(backends)))]
    config = ExecConfig(
        backend_id=backend_id,
        opt_level=opt_level,
        shots=estimate_shots(circuit, cfg.shots_policy),
        seed=int(rng.integers(0, 2**63)),
    )
    return Program(circuit=circuit, config=config)
