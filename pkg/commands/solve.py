import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from commands.common import POSITIVE, dump, finish, parse_floats
from dependencies import stopwatch
from errors import UnsupportedError
from hessian.core import spectrum_sigma
from hessian.fd_solver import EXACT_TOL, convergence_study, exact_boundary, manufactured_rhs, solve_dirichlet
from hessian.stencils import interior
from hessian.zoo import parse_solution
from models import GridField
from schemas import Branch, InitialGuess, Preconditioner, SolutionKind, SolveConfig, Violation
from storage import write_grid, write_solve_log, write_table

logger = logging.getLogger(__name__)

router = typer.Typer()


@router.command("solve")
def solve(
    dim: int = typer.Option(2, min=2, max=3, help="box dimension"),
    boundary: str = typer.Option("quadratic:1,1", help="closed-form solution supplying the Dirichlet data"),
    h: float = typer.Option(0.0625, click_type=POSITIVE, help="grid spacing"),
    box: float = typer.Option(0.5, click_type=POSITIVE, help="half-width of the cube"),
    rhs: float = typer.Option(1.0, click_type=POSITIVE, help="constant right-hand side f"),
    manufactured: bool = typer.Option(False, help="use f = sigma2(D^2 u_exact) at the nodes"),
    negative: bool = typer.Option(False, help="solve on the negative branch with data -g"),
    preconditioner: Preconditioner = typer.Option(Preconditioner.ILU),
    initial_guess: InitialGuess = typer.Option(InitialGuess.QUADRATIC_HARMONIC),
    max_newton_iters: int = typer.Option(40, min=1),
    residual_tol: float = typer.Option(1e-10, click_type=POSITIVE),
    study: Optional[str] = typer.Option(None, help="comma-separated spacings for a convergence study"),
    min_order: Optional[float] = typer.Option(None, help="fail when an observed order falls below this"),
    grid: Optional[Path] = typer.Option(None, help="write the solution as a grid container"),
    log: Optional[Path] = typer.Option(None, help="write the Newton log as JSON lines"),
    csv: Optional[Path] = typer.Option(None, help="write the convergence table"),
    report: Optional[Path] = typer.Option(None, help="JSON report path"),
):
    """Damped Newton solve of sigma2(D^2 u) = f with exact Dirichlet data."""
    params = dict(
        dim=dim, boundary=boundary, h=h, box=box, rhs=rhs, manufactured=manufactured, negative=negative,
        preconditioner=preconditioner.value, initial_guess=initial_guess.value,
        max_newton_iters=max_newton_iters, residual_tol=residual_tol, study=study,
    )
    with stopwatch() as watch:
        s = parse_solution(boundary, dim)
        if s.n != dim:
            raise UnsupportedError(f"{s.kind.value} lives in {s.n} dimensions, not {dim}")
        cfg = SolveConfig(
            max_newton_iters=max_newton_iters,
            residual_tol=residual_tol,
            preconditioner=preconditioner,
            initial_guess=initial_guess,
        )
        domain = GridField.box([-box] * dim, [box] * dim, h)
        exact = exact_boundary(s, domain)
        f = manufactured_rhs(s, domain) if manufactured else rhs
        sign = -1.0 if negative else 1.0
        branch = Branch.NEGATIVE if negative else Branch.POSITIVE
        solved, newton = solve_dirichlet(domain, exact.with_values(sign * exact.values), f, cfg, branch)
        inner = interior(dim)
        error = float(np.abs(solved.values[inner] - sign * exact.values[inner]).max())

        results = {"max_error": error, "log": dump(newton)}
        violations = []
        reproduces = s.kind == SolutionKind.QUADRATIC and (
            manufactured or np.isclose(spectrum_sigma(np.linalg.eigvalsh(np.asarray(s.A)), 2), rhs)
        )
        if reproduces and error > EXACT_TOL:
            violations.append(Violation(check="exact-reproduction", detail=f"error above {EXACT_TOL:g}", value=error))

        if study is not None:
            rows = convergence_study(s, parse_floats(study, "--study"), [-box] * dim, [box] * dim, manufactured, cfg)
            results["study"] = [dump(row) for row in rows]
            orders = [row.order for row in rows if row.order is not None]
            if min_order is not None and orders and min(orders) < min_order:
                violations.append(Violation(check="convergence-order", detail=f"order below {min_order:g}", value=min(orders)))
            if csv is not None:
                write_table(csv, rows)
        if grid is not None:
            write_grid(grid, solved)
        if log is not None:
            write_solve_log(log, newton)
        finish("solve", params, results, violations, watch, report)
