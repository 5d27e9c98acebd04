"""Exception types shared across the package."""

from __future__ import annotations


class NetredError(Exception):
    """Base class for all package-specific failures."""


class SdpSolverError(NetredError):
    """Interior-point solve did not converge (distinct from infeasibility)."""


class DegenerateGramianError(NetredError):
    """A Gramian is structurally singular (e.g. zero input or output map)."""


class InadmissibleTruncationError(NetredError):
    """Requested order would split a cluster of equal singular values.

    Carries the admissible neighboring orders so callers can suggest them.
    """

    def __init__(self, message: str, admissible: tuple[int, ...] = ()):
        super().__init__(message)
        self.admissible = admissible


class LosslessAgentError(NetredError):
    """Agent storage certificate is unique; agent reduction is undefined."""


class RealizationError(NetredError):
    """Reduced coupling matrix cannot be realized as a graph Laplacian."""
