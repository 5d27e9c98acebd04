"""Small dense semidefinite-program solver.

Solves trace-objective SDPs over a symmetric (optionally block-diagonal)
matrix variable subject to affine matrix equalities and LMI constraints:

    min/max  tr(W K)
    s.t.     constant + sum_t  L_t K R_t   is PSD (or NSD)   [one or more]
             L K R = rhs                                      [zero or more]
             K respects an optional block-diagonal partition

The variable is parameterized over an orthonormal basis of the symmetric
(block) subspace; equality constraints are eliminated by null-space
projection, and the remaining conic problem is solved with a log-det
barrier interior-point method (phase-I feasibility margin maximization,
then path following).

Storage-certificate programs in this domain routinely have feasible sets
with empty relative interior (dissipation matrices pinned singular along
fixed directions). When phase-I detects a zero margin, the solver performs
kernel-based facial reduction: it centers a slightly relaxed problem,
reads off the forced kernel of each cone, imposes the corresponding linear
equalities, and restricts the cones to the orthogonal complement. This
restores strict feasibility and lets the barrier method converge to high
accuracy on the face.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Decision thresholds (cones are normalized to unit scale internally).
_INTERIOR_TOL = 1e-8
_FACE_RELAX = 1e-7
_FACE_KERNEL_FACTOR = 100.0
_EQ_CONSISTENCY_TOL = 1e-8
_NULLSPACE_RTOL = 1e-10
_MAX_FACE_ROUNDS = 4


@dataclass(frozen=True)
class MatrixTerm:
    """One additive term  left @ K @ right  of an affine matrix map."""

    left: np.ndarray | None = None
    right: np.ndarray | None = None

    def apply(self, K: np.ndarray) -> np.ndarray:
        M = K
        if self.left is not None:
            M = np.asarray(self.left, dtype=float) @ M
        if self.right is not None:
            M = M @ np.asarray(self.right, dtype=float)
        return M


@dataclass(frozen=True)
class LmiConstraint:
    """Affine matrix inequality: constant + sum of terms, PSD or NSD.

    ``sense="pos"`` requires the map to be positive semidefinite,
    ``sense="neg"`` negative semidefinite. The map must be symmetric for
    symmetric K (it is symmetrized numerically).
    """

    terms: list[MatrixTerm]
    constant: np.ndarray
    sense: str = "neg"

    def evaluate(self, K: np.ndarray) -> np.ndarray:
        M = np.asarray(self.constant, dtype=float).copy()
        for term in self.terms:
            M = M + term.apply(K)
        return 0.5 * (M + M.T)

    def linear_part(self, K: np.ndarray) -> np.ndarray:
        M = np.zeros_like(np.asarray(self.constant, dtype=float))
        for term in self.terms:
            M = M + term.apply(K)
        return 0.5 * (M + M.T)

    @property
    def sign(self) -> float:
        if self.sense == "pos":
            return 1.0
        if self.sense == "neg":
            return -1.0
        raise ValueError(f"unknown LMI sense {self.sense!r}")


@dataclass(frozen=True)
class LinearMatrixEquality:
    """Affine equality  left @ K @ right = rhs  (factors default to identity)."""

    rhs: np.ndarray
    left: np.ndarray | None = None
    right: np.ndarray | None = None

    def apply(self, K: np.ndarray) -> np.ndarray:
        M = K
        if self.left is not None:
            M = np.asarray(self.left, dtype=float) @ M
        if self.right is not None:
            M = M @ np.asarray(self.right, dtype=float)
        return M


@dataclass
class SdpProblem:
    """Trace-objective SDP over one symmetric matrix variable."""

    dim: int
    objective_weight: np.ndarray
    sense: str = "min"
    lmi_constraints: list[LmiConstraint] = field(default_factory=list)
    equality_constraints: list[LinearMatrixEquality] = field(default_factory=list)
    block_structure: list[int] | None = None

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if self.block_structure is not None:
            if sum(self.block_structure) != self.dim:
                raise ValueError("block partition sizes must sum to the matrix dimension")
            if any(b <= 0 for b in self.block_structure):
                raise ValueError("block sizes must be positive")


@dataclass
class SdpSolution:
    """Optimizer with convergence diagnostics."""

    status: str
    value: float
    matrix: np.ndarray
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    message: str = ""
    diagnostics: dict = field(default_factory=dict)


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _symmetric_basis(dim: int, blocks: list[int] | None) -> np.ndarray:
    """Orthonormal (Frobenius) basis of the symmetric block-diagonal subspace."""
    if blocks is None:
        blocks = [dim]
    mats = []
    start = 0
    isq = 1.0 / np.sqrt(2.0)
    for size in blocks:
        for i in range(start, start + size):
            E = np.zeros((dim, dim))
            E[i, i] = 1.0
            mats.append(E)
            for j in range(i + 1, start + size):
                E = np.zeros((dim, dim))
                E[i, j] = isq
                E[j, i] = isq
                mats.append(E)
        start += size
    return np.array(mats)


class _Cone:
    """One PSD constraint expressed in the current free parameters."""

    __slots__ = ("G0", "Gi", "scale")

    def __init__(self, G0: np.ndarray, Gi: np.ndarray):
        scale = max(1e-12, float(np.max(np.abs(G0))) if G0.size else 0.0)
        if Gi.size:
            scale = max(scale, float(np.max(np.abs(Gi))))
        self.scale = scale
        self.G0 = G0 / scale
        self.Gi = Gi / scale

    @property
    def dim(self) -> int:
        return self.G0.shape[0]

    def value(self, x: np.ndarray) -> np.ndarray:
        G = self.G0.copy()
        if self.Gi.size:
            G = G + np.tensordot(x, self.Gi, axes=(0, 0))
        return _sym(G)


def _cholesky_or_none(M: np.ndarray):
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None


def _barrier_minimize(
    cones: list[_Cone],
    c: np.ndarray,
    x0: np.ndarray,
    gap_tol: float,
    max_newton: int,
    mu0: float | None = None,
    mu_floor: float = 0.0,
):
    """Path-following minimization of c'x over the intersection of cones.

    Returns (x, n_newton, status) where status is one of "optimal",
    "max_iterations", "unbounded". The final barrier gap is mu * total_dim.
    """
    nu = sum(cone.dim for cone in cones)
    x = x0.copy()
    d = x.size
    if nu == 0 or d == 0:
        return x, 0.0, 0, "optimal"
    mu = mu0 if mu0 is not None else max(1.0, abs(float(c @ x)) / nu)
    steps = 0
    status = "optimal"
    while True:
        # Newton centering for the current mu.
        for _ in range(60):
            if steps >= max_newton:
                return x, mu, steps, "max_iterations"
            grad = c.copy()
            hess = np.zeros((d, d))
            singular = False
            for cone in cones:
                G = cone.value(x)
                Lc = _cholesky_or_none(G)
                if Lc is None:
                    singular = True
                    break
                if not cone.Gi.size:
                    continue
                Linv = np.linalg.inv(Lc)
                # M_i = L^{-1} G_i L^{-T}; grad_i -= mu tr(M_i); hess += mu tr(M_i M_k)
                Ms = np.einsum("ab,ibc,dc->iad", Linv, cone.Gi, Linv, optimize=True)
                grad -= mu * np.trace(Ms, axis1=1, axis2=2)
                flat = Ms.reshape(Ms.shape[0], -1)
                flatT = np.transpose(Ms, (0, 2, 1)).reshape(Ms.shape[0], -1)
                hess += mu * (flat @ flatT.T)
            if singular:
                raise FloatingPointError("barrier iterate left the cone interior")
            # Solve the Newton system with escalating regularization.
            reg = 1e-14 * max(1.0, float(np.max(np.abs(hess))))
            for _ in range(12):
                try:
                    Ln = np.linalg.cholesky(hess + reg * np.eye(d))
                    break
                except np.linalg.LinAlgError:
                    reg *= 100.0
            else:
                return x, mu, steps, "max_iterations"
            dx = -np.linalg.solve(Ln.T, np.linalg.solve(Ln, grad))
            decrement_sq = float(-grad @ dx)
            steps += 1
            # Backtracking: stay strictly inside all cones, then Armijo.
            alpha = 1.0
            fx = float(c @ x) - mu * sum(
                2.0 * np.sum(np.log(np.diag(_cholesky_or_none(cone.value(x))))) for cone in cones
            )
            accepted = False
            for _ in range(60):
                xn = x + alpha * dx
                ok = True
                logdet = 0.0
                for cone in cones:
                    Lc = _cholesky_or_none(cone.value(xn))
                    if Lc is None:
                        ok = False
                        break
                    logdet += 2.0 * np.sum(np.log(np.diag(Lc)))
                if ok:
                    fn = float(c @ xn) - mu * logdet
                    if fn <= fx + 1e-4 * alpha * float(grad @ dx) + 1e-12 * abs(fx):
                        x = xn
                        accepted = True
                        break
                alpha *= 0.5
            if not accepted or decrement_sq <= max(1e-2 * mu * nu, 1e-16 * (1.0 + abs(fx))):
                break
        value = float(c @ x)
        if value < -1e14 * (1.0 + float(np.linalg.norm(c))):
            return x, mu, steps, "unbounded"
        if mu * nu <= max(gap_tol, mu_floor * nu):
            return x, mu, steps, status
        mu /= 10.0


class _Parameterization:
    """Affine map from free parameters to the matrix variable."""

    def __init__(self, problem: SdpProblem):
        self.problem = problem
        self.basis = _symmetric_basis(problem.dim, problem.block_structure)
        self.offset = np.zeros(self.basis.shape[0])  # coefficients, not a matrix
        self.free = np.eye(self.basis.shape[0])
        self.block_proj: list[np.ndarray | None] = [None] * len(problem.lmi_constraints)
        self.consistent = True
        self.eq_residual = 0.0

    def matrix_at(self, coeffs: np.ndarray) -> np.ndarray:
        return np.tensordot(coeffs, self.basis, axes=(0, 0))

    def matrix_from_params(self, x: np.ndarray) -> np.ndarray:
        return self.matrix_at(self.offset + self.free @ x)

    @property
    def n_params(self) -> int:
        return self.free.shape[1]

    def eliminate_equalities(self) -> None:
        eqs = self.problem.equality_constraints
        if not eqs:
            return
        rows = []
        rhs = []
        for eq in eqs:
            target = np.atleast_2d(np.asarray(eq.rhs, dtype=float))
            rows.append(
                np.stack([eq.apply(E).reshape(-1) for E in self.basis], axis=1)
            )
            rhs.append(target.reshape(-1))
        A = np.vstack(rows)
        b = np.concatenate(rhs)
        self._restrict(A, b)

    def restrict_params(self, A_x: np.ndarray, b_x: np.ndarray) -> None:
        """Impose A_x @ x = b_x on the current free parameters."""
        A_theta = A_x @ self.free.T @ self.free  # rows in theta space via free basis
        # Work directly in x space, then compose.
        sol, *_ = np.linalg.lstsq(A_x, b_x, rcond=None)
        resid = float(np.linalg.norm(A_x @ sol - b_x))
        scale = 1.0 + float(np.linalg.norm(b_x))
        if resid > _EQ_CONSISTENCY_TOL * scale * max(1.0, float(np.linalg.norm(A_x))):
            self.consistent = False
            self.eq_residual = resid
            return
        _, s, Vt = np.linalg.svd(A_x, full_matrices=True)
        tol = _NULLSPACE_RTOL * (s[0] if s.size else 0.0)
        rank = int(np.sum(s > tol)) if s.size else 0
        null = Vt[rank:].T
        self.offset = self.offset + self.free @ sol
        self.free = self.free @ null
        del A_theta

    def _restrict(self, A: np.ndarray, b: np.ndarray) -> None:
        """Impose A @ theta = b in coefficient space (initial equalities)."""
        sol, *_ = np.linalg.lstsq(A, b, rcond=None)
        resid = float(np.linalg.norm(A @ sol - b))
        norm_A = float(np.linalg.norm(A)) if A.size else 0.0
        if resid > _EQ_CONSISTENCY_TOL * (1.0 + float(np.linalg.norm(b))) * max(1.0, norm_A):
            self.consistent = False
            self.eq_residual = resid
            return
        self.eq_residual = resid
        _, s, Vt = np.linalg.svd(A, full_matrices=True)
        tol = _NULLSPACE_RTOL * (s[0] if s.size else 0.0)
        rank = int(np.sum(s > tol)) if s.size else 0
        self.offset = sol
        self.free = Vt[rank:].T

    def build_cones(self) -> list[_Cone]:
        cones = []
        K0 = self.matrix_at(self.offset)
        for idx, lmi in enumerate(self.problem.lmi_constraints):
            sign = lmi.sign
            G0 = sign * lmi.evaluate(K0)
            Gi = np.array(
                [sign * lmi.linear_part(self.matrix_at(col)) for col in self.free.T]
            )
            if Gi.size == 0:
                Gi = np.zeros((0, G0.shape[0], G0.shape[0]))
            W = self.block_proj[idx]
            if W is not None:
                G0 = W.T @ G0 @ W
                Gi = np.einsum("ab,ibc,cd->iad", W.T, Gi, W) if Gi.size else Gi
            cones.append(_Cone(G0, Gi))
        return cones

    def objective_vector(self) -> tuple[np.ndarray, float]:
        W = np.asarray(self.problem.objective_weight, dtype=float)
        sign = 1.0 if self.problem.sense == "min" else -1.0
        c = sign * np.array(
            [np.trace(W @ self.matrix_at(col)) for col in self.free.T]
        )
        const = sign * float(np.trace(W @ self.matrix_at(self.offset)))
        return c, const

    def project_block(self, idx: int, kernel: np.ndarray) -> None:
        """Restrict cone idx to the orthogonal complement of kernel columns."""
        current = self.block_proj[idx]
        dim = (
            current.shape[1]
            if current is not None
            else self.problem.lmi_constraints[idx].constant.shape[0]
        )
        # Orthonormal complement of the kernel within the current block space.
        Q, _ = np.linalg.qr(kernel)
        full = np.eye(dim) - Q @ Q.T
        U, s, _ = np.linalg.svd(full)
        keep = U[:, s > 0.5]
        self.block_proj[idx] = keep if current is None else current @ keep


def _phase1(cones: list[_Cone], max_newton: int):
    """Maximize the joint feasibility margin t with cap t <= 1."""
    d = cones[0].Gi.shape[0] if cones else 0
    aug = []
    for cone in cones:
        eye = np.eye(cone.dim)
        Gi = np.concatenate([cone.Gi, -eye[None]], axis=0) if d else (-eye[None])
        aug.append(_Cone(cone.G0, Gi))
    cap = _Cone(np.array([[1.0]]), np.concatenate([np.zeros((d, 1, 1)), -np.ones((1, 1, 1))]))
    aug.append(cap)
    t0 = min(min(float(np.linalg.eigvalsh(cone.G0)[0]) for cone in cones) - 1.0, 0.0)
    x0 = np.concatenate([np.zeros(d), [t0]])
    c = np.zeros(d + 1)
    c[-1] = -1.0
    x, mu, steps, status = _barrier_minimize(aug, c, x0, gap_tol=1e-11, max_newton=max_newton)
    return x[:d], float(x[-1]), steps, status


def _analytic_center_relaxed(cones, x_start, delta, max_newton):
    relaxed = []
    for cone in cones:
        G0 = cone.G0 + delta * np.eye(cone.dim)
        relaxed.append(_Cone(G0, cone.Gi))
    d = x_start.size
    x, _, steps, _ = _barrier_minimize(
        relaxed, np.zeros(d), x_start, gap_tol=1e300, max_newton=max_newton, mu0=1.0
    )
    return x, steps


def solve(
    problem: SdpProblem,
    gap_tol: float = 1e-9,
    max_iterations: int = 200,
) -> SdpSolution:
    """Solve a small dense SDP.

    Parameters
    ----------
    problem : SdpProblem
        Problem description (variable dimension, objective, constraints).
    gap_tol : float
        Relative barrier-gap target: iterate until gap <= gap_tol * (1 + |obj|).
    max_iterations : int
        Newton-step budget per barrier solve.

    Returns
    -------
    SdpSolution
        ``status`` is "optimal", "infeasible", "unbounded" or
        "max_iterations". Residuals are measured on the original
        constraints at the returned matrix.
    """
    par = _Parameterization(problem)
    par.eliminate_equalities()
    diagnostics: dict = {"facial_reduction_rounds": 0, "newton_steps": 0}
    if not par.consistent:
        return SdpSolution(
            status="infeasible",
            value=np.nan,
            matrix=np.full((problem.dim, problem.dim), np.nan),
            primal_residual=np.inf,
            dual_residual=np.nan,
            gap=np.nan,
            iterations=0,
            message=(
                "equality constraints are inconsistent "
                f"(least-squares residual {par.eq_residual:.3e})"
            ),
            diagnostics=diagnostics,
        )

    relax_used = 0.0
    status = "optimal"
    message = ""
    for round_idx in range(_MAX_FACE_ROUNDS + 1):
        cones = par.build_cones()
        if par.n_params == 0:
            x = np.zeros(0)
            margins = [float(np.linalg.eigvalsh(c.G0)[0]) for c in cones] or [0.0]
            if min(margins) < -_INTERIOR_TOL:
                status = "infeasible"
                message = (
                    "variable is fully determined by equalities and violates an LMI "
                    f"(margin {min(margins):.3e})"
                )
            break
        xi, t_star, steps, p1_status = _phase1(cones, max_iterations)
        diagnostics["newton_steps"] += steps
        diagnostics["phase1_margin"] = t_star
        if p1_status == "max_iterations":
            status = "max_iterations"
            message = "phase-I feasibility search exhausted its Newton budget"
            x = xi
            break
        if t_star < -_INTERIOR_TOL:
            return SdpSolution(
                status="infeasible",
                value=np.nan,
                matrix=par.matrix_from_params(xi),
                primal_residual=-t_star,
                dual_residual=np.nan,
                gap=np.nan,
                iterations=diagnostics["newton_steps"],
                message=(
                    "no point satisfies all matrix inequalities; "
                    f"best achievable joint margin {t_star:.3e} < 0"
                ),
                diagnostics=diagnostics,
            )
        if t_star > _INTERIOR_TOL:
            x = xi
            break
        # Empty relative interior: facial reduction round.
        if round_idx == _MAX_FACE_ROUNDS:
            relax_used = _FACE_RELAX
            x = xi
            break
        delta = max(_FACE_RELAX, -2.0 * min(t_star, 0.0))
        xc, steps = _analytic_center_relaxed(cones, xi, delta, max_iterations)
        diagnostics["newton_steps"] += steps
        found_kernel = False
        face_rows = []
        for idx, cone in enumerate(cones):
            G = cone.value(xc)
            w, V = np.linalg.eigh(G)
            kernel = V[:, w <= _FACE_KERNEL_FACTOR * delta]
            if kernel.shape[1] == 0:
                continue
            found_kernel = True
            par.project_block(idx, kernel)
            # Linear equations G_j(x) v = 0 for each kernel vector.
            for v in kernel.T:
                rows = cone.Gi @ v if cone.Gi.size else np.zeros((0, cone.dim))
                face_rows.append((rows.reshape(par.n_params, -1).T, -(cone.G0 @ v)))
        if not found_kernel:
            relax_used = delta
            x = xi
            break
        A_face = np.vstack([r for r, _ in face_rows])
        b_face = np.concatenate([b for _, b in face_rows])
        par.restrict_params(A_face, b_face)
        diagnostics["facial_reduction_rounds"] += 1
        if not par.consistent:
            # Over-aggressive cut; fall back to the relaxed problem.
            par = _Parameterization(problem)
            par.eliminate_equalities()
            relax_used = delta
            cones = par.build_cones()
            xi, t_star, steps, _ = _phase1(cones, max_iterations)
            diagnostics["newton_steps"] += steps
            x = xi
            break
    else:  # pragma: no cover - loop always breaks
        x = np.zeros(par.n_params)

    if status in ("optimal",) and par.n_params > 0:
        cones = par.build_cones()
        if relax_used > 0.0:
            cones = [_Cone(c.G0 + relax_used * np.eye(c.dim), c.Gi) for c in cones]
        c_vec, c_const = par.objective_vector()
        nu = sum(c.dim for c in cones)
        x, mu, steps, ph2_status = _barrier_minimize(
            cones,
            c_vec,
            x,
            gap_tol=gap_tol * (1.0 + abs(float(c_vec @ x) + c_const)),
            max_newton=max_iterations,
        )
        diagnostics["newton_steps"] += steps
        gap = mu * nu
        if ph2_status == "unbounded":
            return SdpSolution(
                status="unbounded",
                value=-np.inf if problem.sense == "min" else np.inf,
                matrix=par.matrix_from_params(x),
                primal_residual=0.0,
                dual_residual=np.nan,
                gap=gap,
                iterations=diagnostics["newton_steps"],
                message="objective is unbounded over the feasible set",
                diagnostics=diagnostics,
            )
        if ph2_status == "max_iterations":
            status = "max_iterations"
            message = "barrier phase exhausted its Newton budget"
    else:
        gap = 0.0

    K = par.matrix_from_params(x) if par.n_params else par.matrix_at(par.offset)
    K = _sym(K)

    # Residuals on the original constraints.
    primal = 0.0
    for lmi in problem.lmi_constraints:
        G = lmi.sign * lmi.evaluate(K)
        if G.size:
            primal = max(primal, -float(np.linalg.eigvalsh(G)[0]))
    for eq in problem.equality_constraints:
        primal = max(
            primal,
            float(np.max(np.abs(eq.apply(K) - np.atleast_2d(np.asarray(eq.rhs, dtype=float))))),
        )
    W = np.asarray(problem.objective_weight, dtype=float)
    value = float(np.trace(W @ K))
    if status == "optimal" and not message:
        message = "converged"
    diagnostics["relaxation"] = relax_used
    return SdpSolution(
        status=status,
        value=value,
        matrix=K,
        primal_residual=max(0.0, primal),
        dual_residual=0.0,
        gap=gap,
        iterations=diagnostics["newton_steps"],
        message=message,
        diagnostics=diagnostics,
    )
