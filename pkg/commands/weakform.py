import logging
from pathlib import Path
from typing import Optional

import typer

from commands.common import POSITIVE, dump, finish, parse_floats
from dependencies import stopwatch
from errors import InvariantViolation
from hessian.weak_form import bump, distributional_laplacian_sign, hessian_mass, integrate, very_weak_residual
from hessian.zoo import parse_solution, zoo_eval
from models import GridField
from schemas import Section, SolutionKind, Violation
from storage import write_table

logger = logging.getLogger(__name__)

router = typer.Typer()


@router.command("weakform")
def weakform(
    solution: str = typer.Option("warren", help="closed-form solution"),
    n: int = typer.Option(3, help="dimension"),
    h: float = typer.Option(0.0625, click_type=POSITIVE, help="grid spacing on [-box, box]^n"),
    box: float = typer.Option(1.0, click_type=POSITIVE, help="half-width of the cube"),
    center: Optional[str] = typer.Option(None, help="bump centre, comma-separated (default origin)"),
    radius: float = typer.Option(0.5, click_type=POSITIVE, help="bump radius"),
    scales: Optional[str] = typer.Option(None, help="per-axis bump scales, comma-separated"),
    direction: Optional[str] = typer.Option(None, help="direction of a Laplacian section"),
    base: Optional[str] = typer.Option(None, help="base point of the section (default origin)"),
    count: int = typer.Option(200, min=2, help="points on the section"),
    csv: Optional[Path] = typer.Option(None, help="write the section profile"),
    report: Optional[Path] = typer.Option(None, help="JSON report path"),
):
    """Very-weak residual, Hessian mass and Laplacian sign along a section."""
    params = dict(
        solution=solution, n=n, h=h, box=box, center=center, radius=radius, scales=scales,
        direction=direction, base=base, count=count,
    )
    with stopwatch() as watch:
        s = parse_solution(solution, n)
        results = {}
        violations = []
        if s.kind != SolutionKind.LI_SINGULAR:
            u = GridField.from_function(lambda x: zoo_eval(s, x, order=0).value, [-box] * s.n, [box] * s.n, h)
            phi = bump(parse_floats(center, "--center") or [0.0] * s.n, radius, parse_floats(scales, "--scales"))
            results["very_weak_residual"] = very_weak_residual(u, phi)
            results["bump_integral"] = integrate(phi, u)
            try:
                results["hessian_mass"] = dump(hessian_mass(u))
            except InvariantViolation as exc:
                violations.append(Violation(check="hessian-mass", detail=str(exc)))
        if direction is not None:
            section = Section(
                base=parse_floats(base, "--base") or [0.0] * s.n,
                direction=parse_floats(direction, "--direction"),
                count=count,
            )
            profile = distributional_laplacian_sign(s, section)
            results["section"] = {"sign_changes": profile.sign_changes, "divergence_slope": profile.divergence_slope}
            if csv is not None:
                write_table(csv, profile.points)
        finish("weakform", params, results, violations, watch, report)
