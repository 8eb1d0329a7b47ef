"""Exception hierarchy for the zomd package.

All errors raised deliberately by this package derive from :class:`ZomdError`
so callers can catch everything with a single ``except`` clause while still
being able to distinguish the individual failure modes.
"""

from __future__ import annotations

__all__ = [
    "ZomdError",
    "GeometryError",
    "InvalidPointError",
    "GradientUndefinedError",
    "InvalidGradientError",
    "DomainViolationError",
    "UntunableError",
    "ValidationError",
]


class ZomdError(Exception):
    """Base class for all exceptions raised by zomd."""


class GeometryError(ZomdError):
    """Ill-formed geometry: unknown domain/prox pairing or bad dimensions."""


class InvalidPointError(ZomdError):
    """A point violates the feasible-set membership it was required to satisfy."""


class GradientUndefinedError(ZomdError):
    """The prox-function gradient does not exist at the requested point."""


class InvalidGradientError(ZomdError):
    """A gradient (or gradient estimate) contains non-finite entries."""


class DomainViolationError(ZomdError):
    """An oracle was queried outside the region it is defined on."""


class UntunableError(ZomdError):
    """The requested accuracy cannot be certified from the given constants."""


class ValidationError(ZomdError):
    """Inconsistent run configuration (mode, schedule, geometry, or noise)."""
