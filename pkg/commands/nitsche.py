import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from commands.common import POSITIVE, dump, finish, parse_floats
from dependencies import stopwatch
from errors import InvariantViolation
from hessian.nitsche import (
    conjugate_functions,
    heinz_potential,
    jorgens_chain,
    maximal_residual,
    mg_grid,
    minimal_surface_jacobi_defect,
    minimal_surface_residual,
)
from schemas import MinimalGraph2D, MinimalGraphKind, Violation
from storage import write_table

logger = logging.getLogger(__name__)

router = typer.Typer()

MINIMAL_TOL = 1e-10


@router.command("nitsche")
def nitsche(
    graph: MinimalGraphKind = typer.Option(MinimalGraphKind.SCHERK, case_sensitive=False),
    slope: Optional[str] = typer.Option(None, help="plane slope a1,a2"),
    half_width: float = typer.Option(1.0, click_type=POSITIVE, help="the patch is [-w, w]^2"),
    h: float = typer.Option(1 / 64, click_type=POSITIVE, help="grid spacing"),
    jorgens: bool = typer.Option(False, help="also run the Legendre-Lewy step with K = 1"),
    csv: Optional[Path] = typer.Option(None, help="write x1*, x2*, f* and the Heinz potential per node"),
    report: Optional[Path] = typer.Option(None, help="JSON report path"),
):
    """Conjugate functions, Heinz potential and maximal surface of a minimal graph."""
    params = dict(graph=graph.value, slope=slope, half_width=half_width, h=h, jorgens=jorgens)
    with stopwatch() as watch:
        a = parse_floats(slope, "--slope") or [0.0, 0.0]
        mg = MinimalGraph2D(kind=graph, slope=tuple(a), half_width=half_width)
        grid = mg_grid(mg, h)
        violations = []

        closed = minimal_surface_residual(mg, grid.points())
        if closed > MINIMAL_TOL:
            violations.append(Violation(check="minimal-surface", detail="closed-form residual", value=closed))
        conj = conjugate_functions(mg, grid)
        heinz = heinz_potential(mg, grid)
        results = {
            "minimal_surface_residual": closed,
            "path_err": conj.path_err,
            "heinz": dump(heinz.summary()),
            "jacobi_defect": dump(minimal_surface_jacobi_defect(mg, grid)),
        }
        try:
            results["maximal"] = dump(maximal_residual(mg, grid))
        except InvariantViolation as exc:
            violations.append(Violation(check="lorentz-identity", detail=str(exc)))
        if jorgens:
            results["jorgens"] = dump(jorgens_chain(mg, grid))
        if csv is not None:
            points = grid.points().reshape(-1, 2)
            columns = {
                "x1": points[:, 0],
                "x2": points[:, 1],
                "x1s": conj.x1s.values.ravel(),
                "x2s": conj.x2s.values.ravel(),
                "fs": conj.fs.values.ravel(),
                "u": heinz.u.values.ravel(),
            }
            write_table(csv, (dict(zip(columns, map(float, row))) for row in np.column_stack(list(columns.values()))))
        finish("nitsche", params, results, violations, watch, report)
