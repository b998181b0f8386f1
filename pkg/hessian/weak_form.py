"""Very-weak residual, Hessian mass and Laplacian sign profiles."""
import logging
import math
from itertools import combinations
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gamma as gamma_fn

from errors import DomainError, InvariantViolation
from hessian.core import sigma2_batch
from hessian.stencils import gradient, interior, second_differences
from hessian.zoo import branch_jump_profile, zoo_eval
from models import GridField
from schemas import (
    ClosedFormSolution,
    HessianMass,
    ProfilePoint,
    Section,
    SectionProfile,
    SolutionKind,
    TestFunction,
)

logger = logging.getLogger(__name__)

MASS_TOL = 1e-12
SUPPORT_GAP = 1e-12


def bump(center: Sequence[float], radius: float, scales: Optional[Sequence[float]] = None) -> TestFunction:
    """Tensor product of ``(1 - t^2)^4`` bumps with half-widths ``radius * scales``."""
    scales = [1.0] * len(center) if scales is None else list(scales)
    return TestFunction(center=list(center), radius=radius, scales=scales)


def _profile(t: np.ndarray):
    inside = np.abs(t) < 1
    s = np.where(inside, 1.0 - t * t, 0.0)
    b0 = s**4
    b1 = -8.0 * t * s**3
    b2 = s**2 * (56.0 * t * t - 8.0)
    return b0, b1, b2


class BumpValues(NamedTuple):
    value: np.ndarray
    hessian: np.ndarray


def bump_values(phi: TestFunction, points: np.ndarray) -> BumpValues:
    """Exact values and Hessians of ``phi`` at points of shape ``(..., n)``."""
    n = len(phi.center)
    w = phi.half_widths()
    t = (points - np.asarray(phi.center)) / w
    b0, b1, b2 = _profile(t)
    value = np.prod(b0, axis=-1)
    hess = np.zeros(points.shape[:-1] + (n, n))
    for i in range(n):
        others = np.prod(np.delete(b0, i, axis=-1), axis=-1)
        hess[..., i, i] = b2[..., i] / w[i] ** 2 * others
    for i, j in combinations(range(n), 2):
        others = np.prod(np.delete(b0, [i, j], axis=-1), axis=-1)
        hess[..., i, j] = hess[..., j, i] = b1[..., i] * b1[..., j] / (w[i] * w[j]) * others
    return BumpValues(value=value, hessian=hess)


def check_support(phi: TestFunction, grid: GridField) -> None:
    if len(phi.center) != grid.n:
        raise DomainError(f"test function lives in {len(phi.center)} dimensions, grid in {grid.n}")
    lo = np.asarray(phi.center) - phi.half_widths()
    hi = np.asarray(phi.center) + phi.half_widths()
    if np.any(lo <= np.asarray(grid.origin) + SUPPORT_GAP) or np.any(hi >= grid.upper - SUPPORT_GAP):
        raise DomainError("test function support must lie strictly inside the grid box")


def quadrature(values: np.ndarray, grid: GridField) -> float:
    """Composite trapezoid rule, one axis at a time."""
    out = values
    for a in reversed(range(grid.n)):
        out = trapezoid(out, dx=grid.spacing[a], axis=a)
    return float(out)


def integrate(phi: TestFunction, grid: GridField) -> float:
    check_support(phi, grid)
    return quadrature(bump_values(phi, grid.points()).value, grid)


def very_weak_residual(u: GridField, phi: TestFunction) -> float:
    """Double-divergence form of sigma2(D^2 u) = 1 tested against ``phi``.

    Only first differences of ``u`` enter; second derivatives fall on ``phi``.
    """
    check_support(phi, u)
    b = bump_values(phi, u.points())
    du = gradient(u.values, u.spacing)
    H = b.hessian
    integrand = np.zeros(u.shape)
    for i, j in combinations(range(u.n), 2):
        integrand += (
            H[..., i, j] * du[..., i] * du[..., j]
            - 0.5 * H[..., i, i] * du[..., j] ** 2
            - 0.5 * H[..., j, j] * du[..., i] ** 2
        )
    return quadrature(integrand - b.value, u)


def surface_constant(n: int) -> float:
    """Area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / float(gamma_fn(n / 2))


def hessian_mass(u: GridField) -> HessianMass:
    """Riemann sums of |D^2 u| and Lap u over the unit ball, with sup |Du|."""
    if not u.covers_ball(1.0):
        raise DomainError("grid must cover the unit ball")
    inner = interior(u.n)
    H = second_differences(u.values, u.spacing)
    r = u.radius()[inner]
    ball = r <= 1.0
    cell = float(np.prod(u.spacing))

    sigma2, trace, norm_sq = sigma2_batch(H[ball])
    l1 = float(np.sum(np.sqrt(norm_sq)) * cell)
    tr = float(np.sum(trace) * cell)
    grad_norm = np.linalg.norm(gradient(u.values, u.spacing), axis=-1)
    grad_bound = float(grad_norm[u.radius() <= 1.0].max())
    off = int(np.sum((sigma2 < 0) | (trace <= 0)))
    C = surface_constant(u.n)

    result = HessianMass(
        l1_hessian=l1,
        trace_integral=tr,
        gradient_bound=grad_bound,
        surface_constant=C,
        trace_ratio=tr / (C * grad_bound) if grad_bound > 0 else None,
        off_cone_nodes=off,
        asserted=off == 0,
    )
    if result.asserted and l1 > tr * (1 + MASS_TOL):
        raise InvariantViolation(f"Hessian mass {l1:.6g} exceeds trace integral {tr:.6g} on the cone")
    if off:
        logger.warning("%d nodes in the unit ball are off the cone sigma2 >= 0, Lap u > 0", off)
    return result


def _sign_changes(values: np.ndarray) -> int:
    signs = np.sign(values)
    signs = signs[signs != 0]
    return int(np.sum(signs[1:] != signs[:-1]))


def _divergence_slope(distance: np.ndarray, values: np.ndarray) -> Optional[float]:
    """log-log slope of |values| against the distance to the singular set, nearest tenth."""
    order = np.argsort(distance)
    keep = order[: max(2, distance.size // 10)]
    keep = keep[(distance[keep] > 0) & (values[keep] != 0)]
    if keep.size < 2:
        return None
    return float(np.polyfit(np.log(distance[keep]), np.log(np.abs(values[keep])), 1)[0])


def distributional_laplacian_sign(s: ClosedFormSolution, section: Section) -> SectionProfile:
    """Lap u along ``base + t * direction`` with sign changes and divergence rate."""
    base = np.asarray(section.base, dtype=float)
    direction = np.asarray(section.direction, dtype=float)
    if base.size != s.n or direction.size != s.n:
        raise DomainError(f"section must live in {s.n} dimensions")
    if not np.any(direction):
        raise DomainError("section direction must be nonzero")
    t = np.linspace(section.t_min, section.t_max, section.count)

    if s.kind == SolutionKind.LI_SINGULAR:
        if direction[7] == 0 and base[7] == 0:
            raise DomainError("section lies inside the singular set x8 = 0")
        on_axis = not np.any(base[:7]) and not np.any(direction[:7])
        if on_axis:
            path = base[7] + direction[7] * t
            path = path[path != 0]
            profile = branch_jump_profile(s, path)
            lap = np.array([p.laplacian for p in profile.points])
            return SectionProfile(points=profile.points, sign_changes=_sign_changes(lap), divergence_slope=profile.slope)
        x = base + t[:, None] * direction
        keep = x[:, 7] != 0
        t, x = t[keep], x[keep]
    else:
        x = base + t[:, None] * direction

    lap = np.trace(zoo_eval(s, x).hessian, axis1=-2, axis2=-1)
    slope = None
    if s.kind == SolutionKind.LI_SINGULAR:
        slope = _divergence_slope(np.abs(x[:, 7]), lap)
    return SectionProfile(
        points=[ProfilePoint(t=float(a), laplacian=float(b)) for a, b in zip(t, lap)],
        sign_changes=_sign_changes(lap),
        divergence_slope=slope,
    )
