"""Minimal state-space container and frequency-domain helpers.

Everything in this package works with strictly proper continuous-time
systems (zero feedthrough), so the container only carries (A, B, C).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float array, rejecting non-finite entries."""
    M = np.atleast_2d(np.asarray(value, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


@dataclass(frozen=True)
class StateSpace:
    """Strictly proper LTI system  dx = A x + B u,  y = C x."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A, "A"))
        object.__setattr__(self, "B", as_matrix(self.B, "B"))
        object.__setattr__(self, "C", as_matrix(self.C, "C"))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise ValueError(f"C has {self.C.shape[1]} columns, expected {n}")

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def eval_tf(self, s: complex) -> np.ndarray:
        """Transfer matrix C (sI - A)^{-1} B at one complex frequency."""
        n = self.order
        return self.C @ np.linalg.solve(s * np.eye(n) - self.A, self.B)

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    def is_hurwitz(self, tol: float = 0.0) -> bool:
        if self.order == 0:
            return True
        return bool(np.max(self.poles().real) < -tol)


def parallel(*systems: StateSpace) -> StateSpace:
    """Parallel interconnection: transfer functions add."""
    systems = [s for s in systems if s.order > 0 or True]
    A = la.block_diag(*[s.A for s in systems])
    B = np.vstack([s.B for s in systems])
    C = np.hstack([s.C for s in systems])
    return StateSpace(A, B, C)


def difference(sys1: StateSpace, sys2: StateSpace) -> StateSpace:
    """System whose transfer function is G1 - G2."""
    if sys1.n_inputs != sys2.n_inputs or sys1.n_outputs != sys2.n_outputs:
        raise ValueError("difference requires matching I/O dimensions")
    return parallel(sys1, StateSpace(sys2.A, sys2.B, -sys2.C))


def sigma_max(system: StateSpace, omega: float) -> float:
    """Largest singular value of the transfer matrix at frequency omega."""
    G = system.eval_tf(1j * omega)
    return float(np.linalg.svd(G, compute_uv=False)[0]) if G.size else 0.0


def tf_distance(sys1: StateSpace, sys2: StateSpace, omegas) -> float:
    """max_w sigma_max(G1(jw) - G2(jw)) over a frequency grid."""
    return max(
        float(np.linalg.svd(sys1.eval_tf(1j * w) - sys2.eval_tf(1j * w), compute_uv=False)[0])
        for w in omegas
    )


def default_frequency_grid(n_points: int = 50, wmin: float = 1e-2, wmax: float = 1e2) -> np.ndarray:
    return np.logspace(np.log10(wmin), np.log10(wmax), n_points)
