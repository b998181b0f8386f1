"""Grid-level Hessian estimate diagnostics: the Guan-Qiu test function and
the doubling ratio of the discrete Laplacian."""
import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from errors import BranchError, DomainError, ResolutionError
from hessian.stencils import gradient, interior, laplacian
from models import GridField
from schemas import DoublingResult, GuanQiuParams

logger = logging.getLogger(__name__)

CUTOFF_RADIUS = 3.0


def _interior_field(u: GridField, values: np.ndarray) -> np.ndarray:
    """Pad an interior array back to the grid shape with nan."""
    out = np.full(u.shape, np.nan)
    out[interior(u.n)] = values
    return out


class GuanQiuResult(NamedTuple):
    P: GridField
    argmax: Tuple[int, ...]
    value: float


def guan_qiu_P(u: GridField, params: Optional[GuanQiuParams] = None, ref_max: Optional[float] = None) -> GuanQiuResult:
    """P = 2 ln(9 - |x|^2) + a|Du|^2/2 + b(x.Du - u) + ln max{ln(Lap u / ref), 1/g}.

    ``ref`` defaults to the largest discrete Laplacian on nodes of the unit ball.
    P is defined on interior nodes with |x| < 3.
    """
    params = params or GuanQiuParams()
    if not u.covers_ball(CUTOFF_RADIUS):
        raise DomainError("grid must cover the ball of radius 3")
    lap = _interior_field(u, laplacian(u.values, u.spacing))
    inner = np.isfinite(lap)
    if np.any(lap[inner] <= 0):
        node = np.unravel_index(int(np.nanargmin(lap)), u.shape)
        raise BranchError(f"discrete Laplacian {lap[node]:.6g} <= 0 at node {tuple(int(i) for i in node)}")
    r2 = np.sum(u.points() ** 2, axis=-1)
    if ref_max is None:
        unit = inner & (r2 <= 1.0)
        if not unit.any():
            raise ResolutionError("no interior node in the unit ball")
        ref_max = float(lap[unit].max())
    if ref_max <= 0:
        raise DomainError("reference Laplacian maximum must be positive")

    du = gradient(u.values, u.spacing)
    x = u.points()
    valid = inner & (r2 < CUTOFF_RADIUS**2)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_term = np.log(np.maximum(np.log(lap / ref_max), 1.0 / params.gamma))
        P = (
            2.0 * np.log(CUTOFF_RADIUS**2 - r2)
            + 0.5 * params.alpha * np.sum(du**2, axis=-1)
            + params.beta * (np.sum(x * du, axis=-1) - u.values)
            + log_term
        )
    P = np.where(valid, P, np.nan)
    flat = int(np.nanargmax(P))
    node = tuple(int(i) for i in np.unravel_index(flat, u.shape))
    logger.debug("Guan-Qiu P peaks at node %s with value %.6g", node, P[node])
    return GuanQiuResult(P=u.with_values(P, mask=valid), argmax=node, value=float(P[node]))


def doubling_ratio(u: GridField, r: float) -> DoublingResult:
    """max over B_2 of the discrete Laplacian divided by its max over B_r."""
    if not 0 < r < 2:
        raise DomainError("inner radius must satisfy 0 < r < 2")
    if not u.covers_ball(2.0):
        raise DomainError("grid must cover the ball of radius 2")
    lap = _interior_field(u, laplacian(u.values, u.spacing))
    radius = u.radius()
    inner = np.isfinite(lap)
    outer_nodes = inner & (radius <= 2.0)
    inner_nodes = inner & (radius <= r)
    if not inner_nodes.any():
        raise ResolutionError(f"no interior node within radius {r:g}")
    max_outer = float(lap[outer_nodes].max())
    max_inner = float(lap[inner_nodes].max())

    grad_norm = np.linalg.norm(gradient(u.values, u.spacing), axis=-1)
    lipschitz = float(grad_norm[radius <= CUTOFF_RADIUS].max())
    if not u.covers_ball(CUTOFF_RADIUS):
        logger.info("Lipschitz norm taken over the available part of the ball of radius 3")
    return DoublingResult(ratio=max_outer / max_inner, max_outer=max_outer, max_inner=max_inner, lipschitz=lipschitz)
