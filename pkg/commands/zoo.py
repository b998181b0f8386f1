import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from commands.common import dump, finish
from dependencies import stopwatch
from hessian.li_singular import resolve_li_singular
from hessian.zoo import LI_SINGULAR_RESOLVED, branch_jump_profile, li_singular, parse_solution, residual_scan, sample_points
from schemas import Violation
from storage import write_table

logger = logging.getLogger(__name__)

router = typer.Typer()

ZOO_TOL = 1e-10
JUMP_SLOPE = -1.4
JUMP_SLOPE_TOL = 0.05


@router.command("verify-zoo")
def verify_zoo(
    solution: str = typer.Option("warren", help="warren, li, li-singular, li-singular-printed or quadratic:d1,d2,..."),
    n: int = typer.Option(3, help="dimension"),
    box: float = typer.Option(2.0, help="half-width of the sampling cube"),
    samples: int = typer.Option(10_000, min=1),
    seed: int = typer.Option(..., help="sampling seed"),
    report: Optional[Path] = typer.Option(None, help="JSON report path"),
    csv: Optional[Path] = typer.Option(None, help="export the (x, u) samples"),
):
    """Check sigma2(D^2 u) = 1 for a closed-form solution at random points."""
    params = dict(solution=solution, n=n, box=box, samples=samples, seed=seed)
    with stopwatch() as watch:
        s = parse_solution(solution, n)
        scan = residual_scan(s, box, samples, seed)
        violations = []
        if scan.max_abs_residual > ZOO_TOL:
            violations.append(
                Violation(check="zoo-residual", detail=f"max |sigma2 - 1| above {ZOO_TOL:g}", value=scan.max_abs_residual)
            )
        if csv is not None:
            x, u = sample_points(s, box, samples, seed)
            names = [f"x{i + 1}" for i in range(s.n)]
            write_table(csv, (dict(zip(names + ["u"], map(float, [*row, val]))) for row, val in zip(x, u)))
        finish("verify-zoo", params, {"scan": dump(scan)}, violations, watch, report, seed=seed, budgets={"samples": samples})


@router.command("resolve-li")
def resolve_li(
    points: int = typer.Option(200, min=4, help="profile points on each side of x8 = 0"),
    report: Optional[Path] = typer.Option(None, help="JSON report path"),
    csv: Optional[Path] = typer.Option(None, help="export the Laplacian profile along the x8 axis"),
):
    """Resolve the singular eight-dimensional solution and profile its branch jump."""
    params = dict(points=points)
    with stopwatch() as watch:
        resolution = resolve_li_singular()
        s = li_singular(a=resolution.a, b=resolution.b, c=resolution.c, gamma1=resolution.gamma1, gamma2=resolution.gamma2)
        side = np.geomspace(1e-4, 1.0, points)
        profile = branch_jump_profile(s, np.concatenate([-side[::-1], side]))

        violations = []
        if not resolution.residual_vanishes:
            violations.append(Violation(check="li-residual", detail="resolved parameters leave a residual"))
        if resolution.a != LI_SINGULAR_RESOLVED["a"] or resolution.gamma1 != LI_SINGULAR_RESOLVED["gamma1"]:
            violations.append(Violation(check="li-exponents", detail=f"a={resolution.a}, gamma1={resolution.gamma1}"))
        if profile.slope is None or abs(profile.slope - JUMP_SLOPE) > JUMP_SLOPE_TOL:
            violations.append(Violation(check="li-slope", detail="Laplacian divergence rate off", value=profile.slope))
        if not profile.sign_change:
            violations.append(Violation(check="li-sign-change", detail="no branch jump across x8 = 0"))
        if csv is not None:
            write_table(csv, profile.points)
        results = {
            "resolution": dump(resolution),
            "slope": profile.slope,
            "sign_change": profile.sign_change,
        }
        finish("resolve-li", params, results, violations, watch, report)
