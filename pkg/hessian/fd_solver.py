"""Damped inexact Newton for sigma2(D^2 u) = f on boxes, in the concave form

    R(u) = Lap_h u - sqrt(2 f + |D^2_h u|^2) = 0,

with second-order central differences (4-point cross stencil for mixed terms).
R = 0 forces Lap_h u > 0.  A start whose Laplacian is near zero is lifted onto
the positive branch first, and the line search never accepts a step that
loses Lap_h u > 0 at any interior node.
"""
import logging
import math
from itertools import combinations
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, spilu, spsolve

from errors import (
    BranchLeftError,
    DomainError,
    LinearSolverError,
    NonConvergenceError,
    UnsupportedError,
)
from hessian.core import sigma2_batch
from hessian.zoo import zoo_eval
from models import GridField
from schemas import (
    Branch,
    ClosedFormSolution,
    ConvergenceRow,
    InitialGuess,
    Preconditioner,
    SolveConfig,
    SolveLog,
    SolveLogEntry,
)

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-9
FORCING_FLOOR = 1e-12

Rhs = Union[float, GridField]


class DiscreteOperators:
    """Sparse second-difference operators restricted to interior rows."""

    def __init__(self, grid: GridField):
        self.shape = grid.shape
        self.n = grid.n
        mask = np.zeros(grid.shape, dtype=bool)
        mask[(slice(1, -1),) * self.n] = True
        flat = mask.ravel()
        self.interior = np.flatnonzero(flat)
        self.boundary = np.flatnonzero(~flat)
        self.interior_shape = tuple(s - 2 for s in grid.shape)

        def second(m, h):
            return sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(m, m)) / h**2

        def first(m, h):
            return sp.diags([-1.0, 1.0], [-1, 1], shape=(m, m)) / (2 * h)

        def along(factors):
            out = sp.identity(1, format="csr")
            for a in range(self.n):
                out = sp.kron(out, factors.get(a, sp.identity(self.shape[a])), format="csr")
            return out[self.interior]

        self.pairs: List[Tuple[int, int]] = [(i, i) for i in range(self.n)] + list(combinations(range(self.n), 2))
        self.ops = {}
        for i, j in self.pairs:
            if i == j:
                op = along({i: second(self.shape[i], grid.spacing[i])})
            else:
                op = along({i: first(self.shape[i], grid.spacing[i]), j: first(self.shape[j], grid.spacing[j])})
            self.ops[(i, j)] = (op[:, self.interior].tocsr(), op[:, self.boundary].tocsr(), op)

    def hessian(self, u_full: np.ndarray) -> np.ndarray:
        """Nodal discrete Hessians at interior nodes, shape ``(N_int, n, n)``."""
        D = np.empty((self.interior.size, self.n, self.n))
        for (i, j), (_, _, op) in self.ops.items():
            D[:, i, j] = D[:, j, i] = op @ u_full
        return D

    def laplacian_split(self):
        A_I = sum(self.ops[(i, i)][0] for i in range(self.n))
        A_B = sum(self.ops[(i, i)][1] for i in range(self.n))
        return A_I.tocsc(), A_B.tocsr()


def concave_residual(D: np.ndarray, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    trace = np.trace(D, axis1=-2, axis2=-1)
    S = np.sqrt(2.0 * f + np.sum(D * D, axis=(-2, -1)))
    return trace - S, S


def coefficient_matrices(D: np.ndarray, S: np.ndarray) -> np.ndarray:
    """``I - D^2_h u / sqrt(2f + |D^2_h u|^2)`` at each node."""
    n = D.shape[-1]
    return np.eye(n) - D / S[:, None, None]


def _jacobian(ops: DiscreteOperators, C: np.ndarray) -> sp.csr_matrix:
    J = None
    for i, j in ops.pairs:
        weight = C[:, i, i] if i == j else 2.0 * C[:, i, j]
        term = sp.diags(weight) @ ops.ops[(i, j)][0]
        J = term if J is None else J + term
    return J.tocsr()


def _preconditioner(J: sp.csr_matrix, kind: Preconditioner) -> LinearOperator:
    if kind == Preconditioner.JACOBI:
        inv_diag = 1.0 / J.diagonal()
        return LinearOperator(J.shape, matvec=lambda r: inv_diag * r)
    ilu = spilu(J.tocsc(), drop_tol=1e-5, fill_factor=20)
    return LinearOperator(J.shape, matvec=ilu.solve)


def _rhs_values(f: Rhs, grid: GridField, interior: np.ndarray) -> np.ndarray:
    if isinstance(f, GridField):
        if f.shape != grid.shape:
            raise DomainError("rhs grid does not match the domain")
        values = f.values.ravel()
    else:
        values = np.full(int(np.prod(grid.shape)), float(f))
    if not np.all(np.isfinite(values)) or values.min() <= 0:
        raise DomainError("right-hand side must satisfy f >= c0 > 0")
    return values[interior]


def initial_guess(
    grid: GridField,
    ops: DiscreteOperators,
    g_full: np.ndarray,
    f_mean: float,
    policy: InitialGuess,
) -> np.ndarray:
    """Harmonic extension of the boundary data, optionally about a convex quadratic.

    The quadratic is ``rho |x - x_c|^2 / 2`` with ``sigma2(rho I) = mean f``.
    """
    n = grid.n
    if policy == InitialGuess.QUADRATIC_HARMONIC:
        rho = math.sqrt(2.0 * f_mean / (n * (n - 1)))
        centre = 0.5 * (np.asarray(grid.origin) + grid.upper)
        q = 0.5 * rho * np.sum((grid.points() - centre) ** 2, axis=-1).ravel()
    else:
        q = np.zeros(g_full.size)
    A_I, A_B = ops.laplacian_split()
    harmonic = spsolve(A_I, -(A_B @ (g_full - q)[ops.boundary]))
    u = g_full.copy()
    u[ops.interior] = q[ops.interior] + harmonic
    return u


def lift_onto_branch(ops: DiscreteOperators, u: np.ndarray, f: np.ndarray) -> Tuple[np.ndarray, float]:
    """Add ``tau w`` with ``Lap_h w = 1`` in the interior and ``w = 0`` on the boundary.

    ``sqrt(2n f / (n - 1))`` is the smallest trace of a matrix with ``sigma2 = f``.
    The lift applies only where ``Lap_h u`` falls below half of it at some node,
    and then ``tau`` raises the Laplacian to at least that floor everywhere.
    Returns the lifted iterate and ``tau``.
    """
    n = ops.n
    lap = np.trace(ops.hessian(u), axis1=-2, axis2=-1)
    floor = np.sqrt(2.0 * n * f / (n - 1))
    if np.all(lap >= 0.5 * floor):
        return u, 0.0
    tau = float(np.max(floor - lap))
    A_I, _ = ops.laplacian_split()
    w = spsolve(A_I, np.ones(ops.interior.size))
    lifted = u.copy()
    lifted[ops.interior] += tau * w
    return lifted, tau


def solve_dirichlet(
    domain: GridField,
    boundary: GridField,
    f: Rhs = 1.0,
    cfg: Optional[SolveConfig] = None,
    branch: Branch = Branch.POSITIVE,
) -> Tuple[GridField, SolveLog]:
    """Solve on the box of ``domain`` with Dirichlet data from ``boundary``'s outer nodes."""
    cfg = cfg or SolveConfig()
    if domain.n not in (2, 3):
        raise UnsupportedError("the solver handles 2-D and 3-D boxes")
    if boundary.shape != domain.shape:
        raise DomainError("boundary data must live on the domain grid")
    if branch == Branch.OFF_LEVEL_SET:
        raise DomainError("choose the positive or the negative branch")
    if branch == Branch.NEGATIVE:
        solved, log = solve_dirichlet(domain, boundary.with_values(-boundary.values), f, cfg, Branch.POSITIVE)
        log.branch = Branch.NEGATIVE
        return solved.with_values(-solved.values), log

    ops = DiscreteOperators(domain)
    f_int = _rhs_values(f, domain, ops.interior)
    u = initial_guess(domain, ops, boundary.values.ravel().astype(float), float(f_int.mean()), cfg.initial_guess)
    u, lift = lift_onto_branch(ops, u, f_int)
    if lift:
        logger.info("initial guess lifted onto the positive branch by %.3g", lift)
    log = SolveLog(branch=Branch.POSITIVE, initial_guess=cfg.initial_guess, lift=lift)

    D = ops.hessian(u)
    R, S = concave_residual(D, f_int)
    C = coefficient_matrices(D, S)
    norm = float(np.abs(R).max())
    for it in range(cfg.max_newton_iters + 1):
        if norm <= cfg.residual_tol:
            log.converged = True
            log.final_residual = norm
            logger.info("Newton converged in %d iterations, residual %.3e", it, norm)
            break
        if it == cfg.max_newton_iters:
            raise NonConvergenceError(norm, it)

        J = _jacobian(ops, C)
        forcing = max(FORCING_FLOOR, min(cfg.linear_tol, norm))
        M = _preconditioner(J, cfg.preconditioner)
        counter = _Counter()
        step, info = gmres(J, -R, rtol=forcing, atol=0.0, maxiter=cfg.linear_maxiter, M=M,
                           callback=counter, callback_type="pr_norm")
        if info < 0 or not np.all(np.isfinite(step)):
            raise LinearSolverError(f"GMRES breakdown (info={info}) at Newton iteration {it}")
        if info > 0:
            logger.warning("GMRES stopped at %d iterations above tolerance %.1e", info, forcing)

        alpha, backtracks = 1.0, 0
        while True:
            trial = u.copy()
            trial[ops.interior] += alpha * step
            D_t = ops.hessian(trial)
            R_t, S_t = concave_residual(D_t, f_int)
            lap_t = np.trace(D_t, axis1=-2, axis2=-1)
            norm_t = float(np.abs(R_t).max())
            if norm_t < norm and lap_t.min() > 0:
                break
            alpha *= cfg.backtrack
            backtracks += 1
            if alpha < cfg.min_step:
                if lap_t.min() <= 0:
                    k = int(np.argmin(lap_t))
                    raise BranchLeftError(_node(ops, k), float(lap_t[k]), it + 1)
                raise NonConvergenceError(norm, it + 1, "line search stalled")
        u, D, R, S, norm = trial, D_t, R_t, S_t, norm_t
        C = coefficient_matrices(D, S)
        log.entries.append(
            SolveLogEntry(
                iteration=it + 1,
                residual=norm,
                step=alpha,
                backtracks=backtracks,
                linear_iterations=counter.count,
                forcing=forcing,
                min_laplacian=float(lap_t.min()),
                min_coefficient_eig=float(np.linalg.eigvalsh(C)[:, 0].min()),
            )
        )
        logger.debug("Newton %d: residual %.3e, step %.3g, %d GMRES iterations", it + 1, norm, alpha, counter.count)

    return domain.with_values(u.reshape(domain.shape)), log


class _Counter:
    def __init__(self):
        self.count = 0

    def __call__(self, _):
        self.count += 1


def _node(ops: DiscreteOperators, k: int) -> Tuple[int, ...]:
    return tuple(int(i) for i in np.unravel_index(ops.interior[k], ops.shape))


def exact_boundary(s: ClosedFormSolution, grid: GridField) -> GridField:
    return grid.with_values(zoo_eval(s, grid.points(), order=0).value)


def manufactured_rhs(s: ClosedFormSolution, grid: GridField) -> GridField:
    """f = sigma2(D^2 u_exact) at the nodes."""
    sigma2, _, _ = sigma2_batch(zoo_eval(s, grid.points(), order=2).hessian)
    return grid.with_values(sigma2)


def convergence_study(
    s: ClosedFormSolution,
    hs: Sequence[float],
    lower: Optional[Sequence[float]] = None,
    upper: Optional[Sequence[float]] = None,
    manufactured: bool = False,
    cfg: Optional[SolveConfig] = None,
) -> List[ConvergenceRow]:
    """Solve with exact boundary data per h; orders from successive error ratios."""
    n = s.n
    lower = [-0.5] * n if lower is None else list(lower)
    upper = [0.5] * n if upper is None else list(upper)
    if len(lower) != n or len(upper) != n:
        raise UnsupportedError(
            f"{s.kind.value} lives in {n} dimensions; a section of a solution is not a solution"
        )
    rows: List[ConvergenceRow] = []
    for h in hs:
        grid = GridField.box(lower, upper, h)
        exact = exact_boundary(s, grid)
        f: Rhs = manufactured_rhs(s, grid) if manufactured else 1.0
        solved, log = solve_dirichlet(grid, exact, f, cfg)
        inner = (slice(1, -1),) * n
        error = float(np.abs(solved.values[inner] - exact.values[inner]).max())
        order = None
        is_exact = error <= EXACT_TOL
        if rows and not is_exact and not rows[-1].exact:
            order = math.log(rows[-1].max_error / error) / math.log(rows[-1].h / h)
        rows.append(ConvergenceRow(h=h, max_error=error, order=order, exact=is_exact, iterations=len(log.entries)))
        logger.info("h=%g: max error %.3e, order %s", h, error, "-" if order is None else f"{order:.2f}")
    return rows
