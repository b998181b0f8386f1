import logging
from pathlib import Path
from typing import Optional

import typer

from commands.common import POSITIVE, dump, finish, parse_floats
from dependencies import stopwatch
from errors import DomainError
from hessian.core import BRANCH_TOL, spectrum_sigma
from hessian.estimates import guan_qiu_P, doubling_ratio
from hessian.jacobi import VIOLATION_TOL, certified_min_gap, manifold_scan, trace_threshold
from hessian.zoo import parse_solution, zoo_eval
from models import GridField
from schemas import GuanQiuParams, JacobiQuantity, QuantityKind, ScanConfig, Violation

logger = logging.getLogger(__name__)

router = typer.Typer()


def _quantity(kind: QuantityKind, shift: float, kappa: Optional[float]) -> JacobiQuantity:
    return JacobiQuantity(kind=kind, K=shift, kappa=kappa)


@router.command("jacobi-scan")
def jacobi_scan(
    n: int = typer.Option(3, min=3, help="dimension"),
    quantity: QuantityKind = typer.Option(QuantityKind.LOG_TRACE, case_sensitive=False),
    kappa: Optional[float] = typer.Option(None, help="override the coefficient of |grad_F b|^2"),
    shift: float = typer.Option(10.0, "--K", min=0.0, help="semiconvexity bound lambda_min >= -K"),
    budget: int = typer.Option(1000, min=1, help="certified evaluations"),
    seed: int = typer.Option(..., help="scan seed"),
    refine_starts: int = typer.Option(4, min=0, help="Nelder-Mead refinements from the worst starts"),
    dynamic_only: bool = typer.Option(False, help="restrict to dynamically semiconvex spectra"),
    threshold: bool = typer.Option(False, help="also estimate the Laplacian threshold of the LogTrace inequality"),
    assert_nonnegative: bool = typer.Option(False, help="fail when a negative certified gap is found"),
    report: Optional[Path] = typer.Option(None, help="JSON report path"),
):
    """Worst certified Jacobi gap over the on-branch manifold."""
    params = dict(
        n=n, quantity=quantity.value, kappa=kappa, K=shift, budget=budget, seed=seed,
        refine_starts=refine_starts, dynamic_only=dynamic_only, threshold=threshold,
    )
    with stopwatch() as watch:
        q = _quantity(quantity, shift, kappa)
        cfg = ScanConfig(budget=budget, seed=seed, refine_starts=refine_starts, dynamic_only=dynamic_only)
        result = manifold_scan(n, q, shift, cfg)
        results = {"scan": dump(result)}
        if threshold:
            results["threshold"] = dump(trace_threshold(n, shift, budget, seed))
        violations = []
        if result.worst.min_gap < -VIOLATION_TOL:
            logger.info("negative certified gap %.3e at %s", result.worst.min_gap, result.worst.spectrum.values)
            if assert_nonnegative:
                violations.append(
                    Violation(check="jacobi-gap", detail="certified gap below zero", value=result.worst.min_gap)
                )
        finish("jacobi-scan", params, results, violations, watch, report, seed=seed, budgets={"evaluations": budget})


@router.command("certify")
def certify(
    spectrum: str = typer.Option(..., "--lambda", help="comma-separated eigenvalues on sigma2 = 1"),
    quantity: QuantityKind = typer.Option(QuantityKind.LOG_TRACE, case_sensitive=False),
    kappa: Optional[float] = typer.Option(None, help="override the coefficient of |grad_F b|^2"),
    shift: float = typer.Option(0.0, "--K", min=0.0),
    seed: Optional[int] = typer.Option(None, help="jitter seed for degenerate top eigenvalues"),
    assert_nonnegative: bool = typer.Option(False, help="fail when the certified gap is negative"),
    report: Optional[Path] = typer.Option(None, help="JSON report path"),
):
    """Certified minimal Jacobi gap at one spectrum."""
    params = dict(spectrum=spectrum, quantity=quantity.value, kappa=kappa, K=shift, seed=seed)
    with stopwatch() as watch:
        lam = parse_floats(spectrum, "--lambda")
        residual = spectrum_sigma(lam, 2) - 1.0
        if abs(residual) > BRANCH_TOL:
            raise DomainError(f"spectrum is off sigma2 = 1 by {residual:.3e}")
        cert = certified_min_gap(lam, _quantity(quantity, shift, kappa), jitter_seed=seed)
        violations = []
        if assert_nonnegative and cert.min_gap < -VIOLATION_TOL:
            violations.append(Violation(check="jacobi-gap", detail="certified gap below zero", value=cert.min_gap))
        finish("certify", params, {"certificate": dump(cert)}, violations, watch, report, seed=seed)


@router.command("doubling")
def doubling(
    solution: str = typer.Option("warren", help="closed-form solution sampled on the grid"),
    n: int = typer.Option(3, help="dimension"),
    h: float = typer.Option(0.1, click_type=POSITIVE, help="grid spacing on [-3, 3]^n"),
    r: float = typer.Option(0.5, help="inner radius, 0 < r < 2"),
    alpha: float = typer.Option(0.0),
    beta: float = typer.Option(0.0),
    gamma: float = typer.Option(0.1, click_type=POSITIVE),
    report: Optional[Path] = typer.Option(None, help="JSON report path"),
):
    """Doubling ratio of the discrete Laplacian and the Guan-Qiu test function."""
    params = dict(solution=solution, n=n, h=h, r=r, alpha=alpha, beta=beta, gamma=gamma)
    with stopwatch() as watch:
        s = parse_solution(solution, n)
        u = GridField.from_function(lambda x: zoo_eval(s, x, order=0).value, [-3.0] * n, [3.0] * n, h)
        ratio = doubling_ratio(u, r)
        gq = guan_qiu_P(u, GuanQiuParams(alpha=alpha, beta=beta, gamma=gamma))
        results = {
            "doubling": dump(ratio),
            "guan_qiu": {
                "argmax": list(gq.argmax),
                "point": u.node_point(gq.argmax).tolist(),
                "value": gq.value,
            },
        }
        finish("doubling", params, results, [], watch, report)
