"""Exception types shared across the laboratory.

Every failure mode that callers are expected to handle gets its own class;
they all derive from :class:`LabError` so a bare ``except LabError`` catches
any domain failure without swallowing programming errors.
"""

from __future__ import annotations

__all__ = [
    "LabError",
    "NonSPDMetric",
    "EdgeProximity",
    "BelowGradientFloor",
    "SupportViolation",
    "NonConvergence",
    "DomainExit",
    "LinearSolveFailure",
    "EigenNonConvergence",
    "NotASolution",
    "EmptyLevelSet",
    "TooFewVertices",
    "RadiusTooSmall",
    "SignConditionViolated",
    "ConfigError",
]


class LabError(Exception):
    """Base class for all laboratory errors."""


class NonSPDMetric(LabError):
    """Metric tensor failed the symmetric-positive-definite check at a point."""


class EdgeProximity(LabError):
    """A finite-difference stencil would leave the chart domain."""


class BelowGradientFloor(LabError):
    """Pointwise operation requested at a node with |grad| at or below the floor."""


class SupportViolation(LabError):
    """Field is nonzero on a non-periodic margin without a declared boundary cap."""


class NonConvergence(LabError):
    """Iteration exhausted its budget without meeting the tolerance."""


class DomainExit(LabError):
    """A geodesic left the chart rectangle; the partial path is attached."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class LinearSolveFailure(LabError):
    """Inner linear solve broke down (indefinite operator or stagnation)."""


class EigenNonConvergence(LabError):
    """Eigenvalue iteration failed to reach the residual tolerance."""


class NotASolution(LabError):
    """Operation requires a PDE solution but the residual check failed."""


class EmptyLevelSet(LabError):
    """Requested level does not intersect the field range."""


class TooFewVertices(LabError):
    """Curve has too few vertices for the requested computation."""


class RadiusTooSmall(LabError):
    """Cutoff or ball radius is below the resolvable grid scale."""


class SignConditionViolated(LabError):
    """Nonlinearity does not satisfy the sign condition required by the check."""


class ConfigError(LabError):
    """Experiment configuration is malformed or inconsistent."""
