"""Domain types for agents, coupling graphs, and networked systems.

The model layer validates every structural assumption the reduction
pipeline relies on: Laplacian structure of the coupling matrix,
passivity and minimality of the shared agent, and the synchronization
hypotheses (connected graph, observable agent).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .errors import SdpSolverError
from .lti import StateSpace, as_matrix

# Structural tolerances (desk-scale problems in double precision).
SYMMETRY_ATOL = 1e-9
ROW_SUM_ATOL = 1e-9
EIG_ZERO_RTOL = 1e-9
OFFDIAG_SIGN_SLACK = 1e-12
RANK_RTOL = 1e-8
KYP_LMI_TOL = 1e-7
KYP_EQ_TOL = 1e-7


@dataclass(frozen=True)
class AgentModel:
    """State-space triple (A, B, C) shared by every node of the network.

    The reduction theory assumes the realization is minimal and passive;
    use :func:`check_minimality` and :func:`check_passivity` to verify.
    """

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
            raise ValueError(f"B must have {n} rows, got {self.B.shape[0]}")
        m = self.B.shape[1]
        if self.C.shape != (m, n):
            raise ValueError(
                f"C must be {m}x{n} (port dimension x state dimension), got {self.C.shape}"
            )

    @property
    def n(self) -> int:
        """State dimension."""
        return self.A.shape[0]

    @property
    def m(self) -> int:
        """Port (input = output) dimension."""
        return self.B.shape[1]

    def to_state_space(self) -> StateSpace:
        return StateSpace(self.A, self.B, self.C)


@dataclass(frozen=True)
class LaplacianMatrix:
    """Weighted graph Laplacian of the coupling topology."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix, "laplacian"))
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"laplacian must be square, got {self.matrix.shape}")

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    def validation(self) -> "LaplacianValidation":
        return validate_laplacian(self.matrix)


def _coerce_laplacian(L) -> np.ndarray:
    if isinstance(L, LaplacianMatrix):
        return L.matrix
    return as_matrix(L, "laplacian")


@dataclass(frozen=True)
class LaplacianValidation:
    """Pass/fail report for each structural condition of a graph Laplacian."""

    symmetric: bool
    zero_row_sums: bool
    sign_pattern: bool
    psd: bool
    simple_zero_eigenvalue: bool
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.symmetric
            and self.zero_row_sums
            and self.sign_pattern
            and self.psd
            and self.simple_zero_eigenvalue
        )

    def failures(self) -> list[str]:
        names = ["symmetric", "zero_row_sums", "sign_pattern", "psd", "simple_zero_eigenvalue"]
        return [name for name in names if not getattr(self, name)]


def validate_laplacian(M) -> LaplacianValidation:
    """Check the structural conditions of a connected undirected Laplacian.

    Conditions: symmetry, zero row/column sums, nonpositive off-diagonal
    with positive diagonal, and positive semidefiniteness with exactly one
    zero eigenvalue (connectedness, checked spectrally).

    Parameters
    ----------
    M : array_like or LaplacianMatrix
        Square matrix to validate.

    Returns
    -------
    LaplacianValidation
        Per-condition report; ``passed`` is True iff all conditions hold.
    """
    L = _coerce_laplacian(M)
    N = L.shape[0]

    sym_err = float(np.max(np.abs(L - L.T))) if N else 0.0
    symmetric = sym_err <= SYMMETRY_ATOL

    row_err = float(np.max(np.abs(L @ np.ones(N)))) if N else 0.0
    col_err = float(np.max(np.abs(L.T @ np.ones(N)))) if N else 0.0
    zero_row_sums = max(row_err, col_err) <= ROW_SUM_ATOL

    off = L[~np.eye(N, dtype=bool)]
    max_offdiag = float(np.max(off)) if off.size else 0.0
    min_diag = float(np.min(np.diag(L))) if N else 0.0
    sign_pattern = max_offdiag <= OFFDIAG_SIGN_SLACK and min_diag > 0.0

    eigs = np.linalg.eigvalsh(0.5 * (L + L.T))
    scale = max(float(np.max(np.abs(eigs))), 1e-300)
    zero_tol = EIG_ZERO_RTOL * scale
    psd = bool(eigs[0] >= -zero_tol)
    n_zero = int(np.sum(np.abs(eigs) <= zero_tol))
    simple_zero_eigenvalue = n_zero == 1 and abs(eigs[0]) <= zero_tol

    return LaplacianValidation(
        symmetric=symmetric,
        zero_row_sums=zero_row_sums,
        sign_pattern=sign_pattern,
        psd=psd,
        simple_zero_eigenvalue=simple_zero_eigenvalue,
        details={
            "symmetry_error": sym_err,
            "row_sum_error": max(row_err, col_err),
            "max_offdiagonal": max_offdiag,
            "min_diagonal": min_diag,
            "eigenvalues": eigs,
            "zero_eigenvalue_count": n_zero,
            "zero_tolerance": zero_tol,
        },
    )


@dataclass(frozen=True)
class NetworkSystem:
    """Diffusively coupled network of identical agents.

    State dynamics  dx = (I_N (x) A - L (x) BC) x + (F (x) B) u,
    output          y  = (H (x) C) x.
    """

    laplacian: LaplacianMatrix
    F: np.ndarray
    H: np.ndarray
    agent: AgentModel

    def __post_init__(self):
        lap = self.laplacian
        if not isinstance(lap, LaplacianMatrix):
            lap = LaplacianMatrix(_coerce_laplacian(lap))
            object.__setattr__(self, "laplacian", lap)
        object.__setattr__(self, "F", as_matrix(self.F, "F"))
        object.__setattr__(self, "H", as_matrix(self.H, "H"))
        N = lap.n_nodes
        if self.F.shape[0] != N:
            raise ValueError(f"F must have {N} rows, got {self.F.shape[0]}")
        if self.H.shape[1] != N:
            raise ValueError(f"H must have {N} columns, got {self.H.shape[1]}")

    @property
    def N(self) -> int:
        return self.laplacian.n_nodes

    @property
    def p(self) -> int:
        return self.F.shape[1]

    @property
    def q(self) -> int:
        return self.H.shape[0]

    @property
    def L(self) -> np.ndarray:
        return self.laplacian.matrix

    def average_input(self) -> np.ndarray:
        """1^T F, the input gain seen by the network average (1 x p)."""
        return np.ones((1, self.N)) @ self.F

    def average_output(self) -> np.ndarray:
        """H 1, the output gain of the network average (q x 1)."""
        return self.H @ np.ones((self.N, 1))

    def to_state_space(self) -> StateSpace:
        """Expanded N*n-state realization of the coupled network."""
        a = self.agent
        A = np.kron(np.eye(self.N), a.A) - np.kron(self.L, a.B @ a.C)
        B = np.kron(self.F, a.B)
        C = np.kron(self.H, a.C)
        return StateSpace(A, B, C)


@dataclass(frozen=True)
class PassivityCertificate:
    """Storage certificate K > 0 with A^T K + K A <= 0 and C = B^T K."""

    K: np.ndarray
    lmi_residual: float
    equality_residual: float

    def is_valid(self, lmi_tol: float = KYP_LMI_TOL, eq_tol: float = KYP_EQ_TOL) -> bool:
        eigs = np.linalg.eigvalsh(0.5 * (self.K + self.K.T))
        return bool(eigs[0] > 0.0 and self.lmi_residual <= lmi_tol and self.equality_residual <= eq_tol)


@dataclass(frozen=True)
class PassivityResult:
    """Outcome of a passivity check: a certificate or an infeasibility report."""

    feasible: bool
    certificate: PassivityCertificate | None
    detail: str
    solution: sdp.SdpSolution


def certificate_residuals(agent: AgentModel, K: np.ndarray) -> tuple[float, float]:
    """(lambda_max(A^T K + K A), ||C - B^T K||_F) for a candidate certificate."""
    K = 0.5 * (K + K.T)
    lmi = agent.A.T @ K + K @ agent.A
    lmi_residual = float(np.max(np.linalg.eigvalsh(0.5 * (lmi + lmi.T))))
    equality_residual = float(np.linalg.norm(agent.C - agent.B.T @ K))
    return lmi_residual, equality_residual


def kyp_problem(agent: AgentModel, sense: str = "min") -> sdp.SdpProblem:
    """Trace-extremal storage-certificate program for a passive agent."""
    n = agent.n
    I = np.eye(n)
    return sdp.SdpProblem(
        dim=n,
        objective_weight=I,
        sense=sense,
        lmi_constraints=[
            # A^T K + K A <= 0
            sdp.LmiConstraint(
                terms=[sdp.MatrixTerm(left=agent.A.T), sdp.MatrixTerm(right=agent.A)],
                constant=np.zeros((n, n)),
                sense="neg",
            ),
            # K >= 0 (positive definiteness follows for minimal passive agents)
            sdp.LmiConstraint(terms=[sdp.MatrixTerm()], constant=np.zeros((n, n)), sense="pos"),
        ],
        equality_constraints=[
            # B^T K = C
            sdp.LinearMatrixEquality(left=agent.B.T, rhs=agent.C),
        ],
    )


def check_passivity(agent: AgentModel) -> PassivityResult:
    """Search for a storage certificate K > 0 of the agent.

    Solves the trace-minimal feasibility program; any feasible point is a
    valid certificate. Infeasibility is reported in-band; solver
    non-convergence raises :class:`SdpSolverError`.
    """
    problem = kyp_problem(agent, sense="min")
    solution = sdp.solve(problem)
    if solution.status == "optimal":
        K = 0.5 * (solution.matrix + solution.matrix.T)
        lmi_res, eq_res = certificate_residuals(agent, K)
        cert = PassivityCertificate(K=K, lmi_residual=lmi_res, equality_residual=eq_res)
        detail = "feasible storage certificate found"
        if not cert.is_valid():
            raise SdpSolverError(
                "storage certificate residuals exceed tolerance "
                f"(lmi {lmi_res:.3e}, equality {eq_res:.3e})"
            )
        return PassivityResult(True, cert, detail, solution)
    if solution.status == "infeasible":
        return PassivityResult(False, None, solution.message, solution)
    raise SdpSolverError(f"storage-certificate solve failed: {solution.status}: {solution.message}")


@dataclass(frozen=True)
class MinimalityReport:
    """Controllability/observability ranks from rank-revealing SVD."""

    minimal: bool
    controllability_rank: int
    observability_rank: int
    state_dim: int
    tolerance: float


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def check_minimality(agent: AgentModel, rtol: float = RANK_RTOL) -> MinimalityReport:
    """Ranks of the controllability and observability matrices.

    Numerical rank uses singular-value thresholding at ``rtol * sigma_max``.
    """
    ctrb = controllability_matrix(agent.A, agent.B)
    obsv = controllability_matrix(agent.A.T, agent.C.T).T

    def num_rank(M: np.ndarray) -> tuple[int, float]:
        s = np.linalg.svd(M, compute_uv=False)
        if s.size == 0 or s[0] == 0.0:
            return 0, 0.0
        tol = rtol * s[0]
        return int(np.sum(s > tol)), tol

    rc, tol_c = num_rank(ctrb)
    ro, tol_o = num_rank(obsv)
    n = agent.n
    return MinimalityReport(
        minimal=(rc == n and ro == n),
        controllability_rank=rc,
        observability_rank=ro,
        state_dim=n,
        tolerance=max(tol_c, tol_o),
    )


def check_sync_hypotheses(net: NetworkSystem) -> bool:
    """True iff the graph is connected and the agent pair (A, C) is observable.

    These are the hypotheses under which the unforced network synchronizes.
    """
    report = validate_laplacian(net.laplacian)
    if not report.passed:
        return False
    minimality = check_minimality(net.agent)
    return minimality.observability_rank == net.agent.n
