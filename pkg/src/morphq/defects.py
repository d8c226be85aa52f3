"""Fault-injection registry for the planted platform defects.

The bundled platform is correct by default. For evaluating the campaign's
detection power, five known-bad code paths can be switched on individually;
each reproduces a distinct crash class in a different pipeline stage. The
active set is process-global: campaigns record it so warnings stay
replayable.
"""

from __future__ import annotations

from contextlib import contextmanager

QASM_DUPLICATE_GATE_DEF = "qasm-duplicate-gate-def"
TRANSLATE_MISSING_ID_RULE = "translate-missing-id-rule"
QASM_COMPOSITE_CLBIT_ARGS = "qasm-composite-clbit-args"
COMMUTATION_DIM_OVERFLOW = "optimize-commutation-dim-overflow"
STRICT_BIND_CHECK = "bind-strict-param-check"

KNOWN_DEFECTS = frozenset(
    {
        QASM_DUPLICATE_GATE_DEF,
        TRANSLATE_MISSING_ID_RULE,
        QASM_COMPOSITE_CLBIT_ARGS,
        COMMUTATION_DIM_OVERFLOW,
        STRICT_BIND_CHECK,
    }
)

_active: set[str] = set()


def set_active(names) -> None:
    """Replace the active defect set (validates names)."""
    names = set(names)
    unknown = names - KNOWN_DEFECTS
    if unknown:
        raise ValueError(f"unknown defect name(s): {sorted(unknown)}")
    _active.clear()
    _active.update(names)


def active() -> frozenset[str]:
    return frozenset(_active)


def enabled(name: str) -> bool:
    return name in _active


def disable_all() -> None:
    _active.clear()


@contextmanager
def planted(*names: str):
    """Temporarily enable the given defects (test helper)."""
    before = active()
    set_active(names)
    try:
        yield
    finally:
        set_active(before)
