"""Canonical JSON serialization for programs and transform records.

The textual form is deterministic (sorted keys, fixed separators) so that
identical programs serialize to identical bytes; campaign reproduction
files and the determinism guarantees rely on this.
"""

from __future__ import annotations

import json
from typing import Any

from .circuit import (
    Circuit,
    Composite,
    CouplingMap,
    ExecConfig,
    Gate,
    Measure,
    Program,
    Symbol,
)
from .errors import SchemaMismatch

PROGRAM_SCHEMA = "morphq-program/1"


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _param_to_json(p):
    if isinstance(p, Symbol):
        return {"symbol": p.name}
    return float(p)


def _param_from_json(p):
    if isinstance(p, dict):
        return Symbol(p["symbol"])
    return float(p)


def instruction_to_json(ins) -> dict:
    if isinstance(ins, Gate):
        return {
            "gate": ins.name,
            "qubits": list(ins.qubits),
            "params": [_param_to_json(p) for p in ins.params],
        }
    if isinstance(ins, Measure):
        return {"measure": [ins.qubit, ins.clbit]}
    return {
        "composite": ins.ref,
        "qubits": list(ins.qubits),
        "clbits": list(ins.clbits),
        "inverted": ins.inverted,
    }


def instruction_from_json(d: dict):
    if "gate" in d:
        return Gate(
            d["gate"],
            tuple(d["qubits"]),
            tuple(_param_from_json(p) for p in d["params"]),
        )
    if "measure" in d:
        q, c = d["measure"]
        return Measure(q, c)
    if "composite" in d:
        return Composite(
            d["composite"], tuple(d["qubits"]), tuple(d["clbits"]), d["inverted"]
        )
    raise SchemaMismatch(f"unrecognized instruction record: {sorted(d)}")


def circuit_to_json(c: Circuit) -> dict:
    return {
        "n_qubits": c.n_qubits,
        "n_clbits": c.n_clbits,
        "instructions": [instruction_to_json(i) for i in c.instructions],
        "subcircuits": {k: circuit_to_json(v) for k, v in sorted(c.subcircuits.items())},
    }


def circuit_from_json(d: dict) -> Circuit:
    try:
        return Circuit(
            d["n_qubits"],
            d["n_clbits"],
            tuple(instruction_from_json(i) for i in d["instructions"]),
            {k: circuit_from_json(v) for k, v in d["subcircuits"].items()},
        )
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"malformed circuit record: {exc}") from exc


def config_to_json(cfg: ExecConfig) -> dict:
    return {
        "backend": cfg.backend_id,
        "opt_level": cfg.opt_level,
        "shots": cfg.shots,
        "seed": cfg.seed,
        "coupling_map": None
        if cfg.coupling_map is None
        else {
            "n_qubits": cfg.coupling_map.n_qubits,
            "edges": [list(e) for e in cfg.coupling_map.edges],
        },
        "target_gate_set": None
        if cfg.target_gate_set is None
        else list(cfg.target_gate_set),
    }


def config_from_json(d: dict) -> ExecConfig:
    cmap = d.get("coupling_map")
    gates = d.get("target_gate_set")
    try:
        return ExecConfig(
            backend_id=d["backend"],
            opt_level=d["opt_level"],
            shots=d["shots"],
            seed=d["seed"],
            coupling_map=None
            if cmap is None
            else CouplingMap(cmap["n_qubits"], tuple(tuple(e) for e in cmap["edges"])),
            target_gate_set=None if gates is None else tuple(gates),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"malformed config record: {exc}") from exc


def program_to_json(p: Program) -> dict:
    from .transforms import record_to_json  # late import: transforms depends on circuit

    return {
        "schema": PROGRAM_SCHEMA,
        "circuit": circuit_to_json(p.circuit),
        "config": config_to_json(p.config),
        "bindings": {k: float(v) for k, v in sorted(p.bindings.items())},
        "provenance": [record_to_json(r) for r in p.provenance],
        "qasm_roundtrips": p.qasm_roundtrips,
    }


def program_from_json(d: dict) -> Program:
    from .transforms import record_from_json

    if d.get("schema") != PROGRAM_SCHEMA:
        raise SchemaMismatch(f"expected schema {PROGRAM_SCHEMA!r}, got {d.get('schema')!r}")
    return Program(
        circuit=circuit_from_json(d["circuit"]),
        config=config_from_json(d["config"]),
        bindings=dict(d["bindings"]),
        provenance=tuple(record_from_json(r) for r in d["provenance"]),
        qasm_roundtrips=d.get("qasm_roundtrips", 0),
    )


def dumps_program(p: Program) -> str:
    """Canonical single-line JSON text of a program."""
    return canonical_json(program_to_json(p))


def loads_program(text: str) -> Program:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"not valid JSON: {exc}") from exc
    return program_from_json(data)
