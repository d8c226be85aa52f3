"""Exception hierarchy shared across the toolkit.

Every error raised by morphq derives from MorphqError so the execution
pipeline can convert failures into structured crash outcomes without
swallowing unrelated exceptions.
"""

from __future__ import annotations


class MorphqError(Exception):
    """Base class for all toolkit errors."""


class CircuitError(MorphqError):
    """Structural violation in a circuit or program."""


class MeasurementNotInvertible(CircuitError):
    """Attempted to invert a circuit containing a measurement."""


class UnboundParameter(CircuitError):
    """A symbolic parameter reached simulation without a binding."""


class TransformError(MorphqError):
    """A metamorphic transformation could not be applied."""


class PreconditionViolated(TransformError):
    """The transformation's precondition does not hold for this program."""


class NoLiteralsAvailable(TransformError):
    """Parameter injection needs at least one literal angle."""


class OnlyOneBackend(TransformError):
    """Change-of-backend needs at least two registered backends."""


class BackendError(MorphqError):
    """Failure inside the transpile/simulate pipeline."""


class NoDecompositionRule(BackendError):
    """The gate-set translation table has no rule for a gate."""


class MapTooSmall(BackendError):
    """Coupling map covers fewer qubits than the circuit uses."""


class QubitLimitExceeded(BackendError):
    """Circuit exceeds a backend's qubit cap."""


class CompareError(MorphqError):
    """Invalid input to a distribution comparison."""


class LengthMismatch(CompareError):
    """Bit-string lengths disagree with the requested operation."""


class PositionOverlap(CompareError):
    """Partition bit positions overlap."""


class EmptyDistribution(CompareError):
    """A statistical test received an empty distribution."""


class SchemaMismatch(MorphqError):
    """A serialized record does not match the expected schema."""
