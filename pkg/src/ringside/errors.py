"""Exception hierarchy shared by every ringside module.

Each operation's contract names the exceptions it may raise; all of them
derive from :class:`RingsideError` so callers can catch the whole family.
"""

from __future__ import annotations


class RingsideError(Exception):
    """Base class for all engine errors."""


# -- parsing / validation ------------------------------------------------


class MalformedInput(RingsideError):
    """Input bytes are not valid JSON / UTF-8."""


class SchemaViolation(RingsideError):
    """JSON parsed but does not satisfy the annotation schema."""


class InvalidArgument(RingsideError):
    """A scalar argument is outside its documented domain."""


class ConfigInvalid(RingsideError):
    """A configuration object violates its invariants (e.g. weight simplex)."""


# -- numerics / shapes ---------------------------------------------------


class DimensionMismatch(RingsideError):
    """Vector/matrix dimensions do not chain."""


class ShapeMismatch(RingsideError):
    """Array shapes disagree."""


class IndexOutOfRange(RingsideError):
    """Class or joint index outside the valid range."""


class InvalidEdge(RingsideError):
    """Skeleton edge references a joint outside the graph."""


class NonFiniteActivation(RingsideError):
    """A forward pass produced NaN or infinity."""


# -- feature extraction --------------------------------------------------


class MissingJoint(RingsideError):
    """A joint required by the feature config is absent."""


class DegenerateSequence(RingsideError):
    """Pose sequence too short for the requested feature."""


# -- decision pipeline ---------------------------------------------------


class UnreviewedFinalization(RingsideError):
    """A review_required verdict was finalized without confirm/override."""


class OutOfOrderTimestamp(RingsideError):
    """Audit entry timestamp precedes the last entry of the match."""


class StorageFailure(RingsideError):
    """Audit persistence failed at the OS level."""


# -- analytics -----------------------------------------------------------


class LengthMismatch(RingsideError):
    """Paired series have different lengths."""


class NegativeLatency(RingsideError):
    """A score timestamp precedes its kick timestamp."""


class EmptyInput(RingsideError):
    """An aggregate was requested over zero items."""


class DegenerateMarginals(RingsideError):
    """Chance agreement is 1 while observed agreement is not."""


class UndefinedScore(RingsideError):
    """Precision/recall denominator is zero."""


class DivisionByZero(RingsideError):
    """A ratio metric was requested with a zero denominator."""


class InvalidWindow(RingsideError):
    """Moving-average window below 1."""


class InsufficientGroups(RingsideError):
    """Disparity requires at least two groups."""


# -- replay / gateway ----------------------------------------------------


class ParseError(RingsideError):
    """Annotation file line failed to parse (carries line number)."""


class SinkClosed(RingsideError):
    """The replay consumer stopped accepting events."""


class SessionClosed(RingsideError):
    """Event arrived for a match with no open session."""


class ValidationFailed(RingsideError):
    """Event rejected by the gateway (e.g. duplicate event_id)."""


class UnknownMatch(RingsideError):
    """No session state for the requested match."""


class NotPending(RingsideError):
    """Override submitted for an event that is not awaiting review."""


class UnknownEvent(RingsideError):
    """Override references an event_id the gateway has never seen."""


class UnknownScope(RingsideError):
    """Metrics snapshot requested for an unknown match/scope."""
