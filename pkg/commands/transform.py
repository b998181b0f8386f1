import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from commands.common import POSITIVE, finish
from dependencies import get_rng, stopwatch
from hessian.core import sample_on_branch
from hessian.jacobi import sample_admissible
from hessian.legendre_lewy import ll_grid_transform, transformation_rule_check, vertical_residuals_batch
from hessian.zoo import parse_solution, zoo_eval
from models import GridField
from schemas import Violation
from storage import write_grid

logger = logging.getLogger(__name__)

router = typer.Typer()

LAW_TOL = 1e-9


def _point_laws(n: int, K: float, samples: int, seed: int) -> dict:
    """Max relative vertical residuals over random semiconvex on-branch spectra."""
    lam = sample_on_branch(n, K, get_rng(seed), samples)
    mu = 1.0 / (lam + K)
    scale = 1.0 + np.sum(lam**2, axis=-1)
    law = float(np.max(np.abs(1.0 / mu - K - lam) / scale))
    out = {"eigenvalue_law": law}
    for name, values in vertical_residuals_batch(mu, K).items():
        out[name] = None if values is None else float(np.max(np.abs(values) / scale))
    return out


@router.command("transform")
def transform(
    n: int = typer.Option(3, help="dimension"),
    shift: float = typer.Option(1.0, "--K", click_type=POSITIVE, help="shift of u + K|x|^2/2"),
    samples: int = typer.Option(0, min=0, help="random spectra for the pointwise laws"),
    rule_samples: int = typer.Option(0, min=0, help="admissible pairs for the transformation rule"),
    seed: Optional[int] = typer.Option(None, help="sampling seed, required with --samples or --rule-samples"),
    solution: Optional[str] = typer.Option(None, help="closed-form solution to transform on a grid"),
    h: float = typer.Option(0.1, click_type=POSITIVE, help="grid spacing"),
    box: float = typer.Option(1.0, click_type=POSITIVE, help="half-width of the horizontal cube"),
    grid: Optional[Path] = typer.Option(None, help="write the vertical potential as a grid container"),
    report: Optional[Path] = typer.Option(None, help="JSON report path"),
):
    """Legendre-Lewy transform: pointwise laws, transformation rule and grid transform."""
    if (samples or rule_samples) and seed is None:
        raise typer.BadParameter("random sampling needs --seed", param_hint="--seed")
    params = dict(n=n, K=shift, samples=samples, rule_samples=rule_samples, seed=seed, solution=solution, h=h, box=box)
    with stopwatch() as watch:
        results = {}
        violations = []
        if samples:
            laws = _point_laws(n, shift, samples, seed)
            results["laws"] = laws
            for name, value in laws.items():
                if value is not None and value > LAW_TOL:
                    violations.append(Violation(check=f"law-{name}", detail=f"relative residual above {LAW_TOL:g}", value=value))
        if rule_samples:
            inconsistent = 0
            for lam, c in sample_admissible(n, shift, seed, rule_samples):
                if not transformation_rule_check(lam, c, shift).sign_consistent:
                    inconsistent += 1
            results["rule"] = {"samples": rule_samples, "inconsistent": inconsistent}
            if inconsistent:
                violations.append(Violation(check="rule-sign", detail="horizontal and vertical signs disagree", value=inconsistent))
        if solution is not None:
            s = parse_solution(solution, n)
            u = GridField.from_function(lambda x: zoo_eval(s, x, order=0).value, [-box] * n, [box] * n, h)
            out = ll_grid_transform(u, shift)
            results["grid"] = {
                "roundtrip_err": out.roundtrip_err,
                "valid_nodes": int(out.mask.sum()),
                "nodes": int(out.mask.size),
                "origin": list(out.w.origin),
                "spacing": list(out.w.spacing),
            }
            if grid is not None:
                write_grid(grid, out.w)
        finish(
            "transform", params, results, violations, watch, report,
            seed=seed, budgets={"samples": samples, "rule_samples": rule_samples},
        )
