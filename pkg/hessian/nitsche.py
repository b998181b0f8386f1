"""Two-dimensional conjugation chain for minimal graphs.

A minimal graph f gives closed 1-forms whose potentials x1*, x2*, f* are its
conjugate functions.  The Heinz potential u with Du = (x2*, x1*) solves
det D^2 u = 1, f* solves the maximal surface equation, and the Legendre-Lewy
transform of u with K = 1 is harmonic up to the constant: Lap w = 1.
"""
import logging
from typing import NamedTuple, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson

from errors import (
    DomainError,
    IntegrabilityError,
    InvariantViolation,
    LorentzViolationError,
    UnsupportedError,
)
from hessian.legendre_lewy import ll_grid_transform
from hessian.stencils import derivative, gradient, laplacian, second_differences
from models import GridField
from schemas import (
    HeinzSummary,
    JorgensChain,
    MaximalResidual,
    MinimalGraph2D,
    MinimalGraphKind,
    MinimalSurfaceDefect,
)

logger = logging.getLogger(__name__)

INTEGRABILITY_TOL = 1e-2
IDENTITY_TOL = 1e-8
EDGE = 2


def plane(a1: float = 0.0, a2: float = 0.0) -> MinimalGraph2D:
    return MinimalGraph2D(kind=MinimalGraphKind.PLANE, slope=(a1, a2))


def scherk(half_width: float = 1.0) -> MinimalGraph2D:
    """f = ln(cos x2 / cos x1) on the square |x_i| <= half_width."""
    return MinimalGraph2D(kind=MinimalGraphKind.SCHERK, half_width=half_width)


def mg_grid(mg: MinimalGraph2D, h: float) -> GridField:
    w = mg.half_width
    return GridField.box([-w, -w], [w, w], h)


class GraphDerivatives(NamedTuple):
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


def mg_derivatives(mg: MinimalGraph2D, points: np.ndarray) -> GraphDerivatives:
    points = np.asarray(points, dtype=float)
    x1, x2 = points[..., 0], points[..., 1]
    hess = np.zeros(points.shape[:-1] + (2, 2))
    if mg.kind == MinimalGraphKind.PLANE:
        a = np.asarray(mg.slope)
        value = points @ a
        grad = np.broadcast_to(a, points.shape).copy()
        return GraphDerivatives(value, grad, hess)
    if np.any(np.abs(points) >= np.pi / 2):
        raise DomainError("Scherk's graph is defined on |x_i| < pi/2")
    value = np.log(np.cos(x2) / np.cos(x1))
    grad = np.stack([np.tan(x1), -np.tan(x2)], axis=-1)
    hess[..., 0, 0] = 1.0 / np.cos(x1) ** 2
    hess[..., 1, 1] = -1.0 / np.cos(x2) ** 2
    return GraphDerivatives(value, grad, hess)


def minimal_surface_residual(mg: MinimalGraph2D, points: np.ndarray) -> float:
    """max |div(Df / sqrt(1 + |Df|^2))| from the closed forms."""
    d = mg_derivatives(mg, points)
    f1, f2 = d.gradient[..., 0], d.gradient[..., 1]
    H = d.hessian
    W2 = 1.0 + f1**2 + f2**2
    mse = (1 + f2**2) * H[..., 0, 0] - 2 * f1 * f2 * H[..., 0, 1] + (1 + f1**2) * H[..., 1, 1]
    return float(np.max(np.abs(mse / W2**1.5), initial=0.0))


def _one_forms(Df: np.ndarray):
    """Coefficient pairs (dx1, dx2) of the three conjugate 1-forms."""
    f1, f2 = Df[..., 0], Df[..., 1]
    W = np.sqrt(1.0 + f1**2 + f2**2)
    return {
        "x1": (f1 * f2 / W, (1 + f2**2) / W),
        "x2": ((1 + f1**2) / W, f1 * f2 / W),
        "f": (-f2 / W, f1 / W),
    }


def _path_integrals(p: np.ndarray, q: np.ndarray, spacing) -> Tuple[np.ndarray, np.ndarray]:
    """Potentials from the lower-left corner along the two L-shaped paths."""
    h1, h2 = spacing
    along_x1 = cumulative_simpson(p, dx=h1, axis=0, initial=0)
    along_x2 = cumulative_simpson(q, dx=h2, axis=1, initial=0)
    first_x1 = along_x1[:, :1] + along_x2
    first_x2 = along_x2[:1, :] + along_x1
    return first_x1, first_x2


class ConjugateFields(NamedTuple):
    x1s: GridField
    x2s: GridField
    fs: GridField
    path_err: float


def _require_box(grid: GridField) -> None:
    if grid.n != 2:
        raise DomainError("the conjugation chain is two-dimensional")
    if grid.mask is not None and not grid.mask.all():
        raise UnsupportedError("conjugate functions need a simply connected box domain")


def conjugate_functions(mg: MinimalGraph2D, grid: GridField) -> ConjugateFields:
    _require_box(grid)
    Df = mg_derivatives(mg, grid.points()).gradient
    fields = {}
    path_err = 0.0
    for name, (p, q) in _one_forms(Df).items():
        a, b = _path_integrals(p, q, grid.spacing)
        path_err = max(path_err, float(np.abs(a - b).max()))
        fields[name] = grid.with_values(a)
    logger.info("conjugate functions: L-path discrepancy %.3e", path_err)
    return ConjugateFields(fields["x1"], fields["x2"], fields["f"], path_err)


class HeinzPotential(NamedTuple):
    u: GridField
    det_residual: float
    sym_check: float

    def summary(self) -> HeinzSummary:
        return HeinzSummary(det_residual=self.det_residual, sym_check=self.sym_check)


def heinz_potential(mg: MinimalGraph2D, grid: GridField, tol: float = INTEGRABILITY_TOL) -> HeinzPotential:
    """The double potential with Du = (x2*, x1*); its Hessian is the normalized metric."""
    conj = conjugate_functions(mg, grid)
    d1 = gradient(conj.x2s.values, grid.spacing)
    d2 = gradient(conj.x1s.values, grid.spacing)
    sym = float(np.abs(d1[..., 1] - d2[..., 0]).max())
    if sym > tol:
        raise IntegrabilityError(f"Du = (x2*, x1*) is not a gradient: curl {sym:.3e} > {tol:g}")
    u, _ = _path_integrals(conj.x2s.values, conj.x1s.values, grid.spacing)
    det = np.linalg.det(second_differences(u, grid.spacing))
    det_residual = float(np.abs(det - 1.0).max())
    logger.info("Heinz potential: max |det D^2 u - 1| = %.3e, curl %.3e", det_residual, sym)
    return HeinzPotential(grid.with_values(u), det_residual, sym)


def maximal_residual(mg: MinimalGraph2D, grid: GridField) -> MaximalResidual:
    """Maximal surface operator on the discrete f*, with the Lorentz bound and
    the identity sqrt(1 - |Df*|^2) sqrt(1 + |Df|^2) = 1 from closed forms."""
    _require_box(grid)
    Df = mg_derivatives(mg, grid.points()).gradient
    p, q = _one_forms(Df)["f"]
    closed = np.stack([p, q], axis=-1)
    W = np.sqrt(1.0 + np.sum(Df**2, axis=-1))
    identity_err = float(np.abs(np.sqrt(1.0 - np.sum(closed**2, axis=-1)) * W - 1.0).max())

    fs = conjugate_functions(mg, grid).fs
    G = gradient(fs.values, grid.spacing)
    norm = np.linalg.norm(G, axis=-1)
    if np.any(norm >= 1.0):
        node = np.unravel_index(int(np.argmax(norm)), norm.shape)
        raise LorentzViolationError(node, float(norm[node]))
    flux = G / np.sqrt(1.0 - norm**2)[..., None]
    div = sum(gradient(flux[..., a], grid.spacing)[..., a] for a in range(2))
    inner = (slice(EDGE, -EDGE),) * 2
    residual = float(np.abs(div[inner]).max())
    if identity_err > IDENTITY_TOL:
        raise InvariantViolation(f"sqrt(1 - |Df*|^2) sqrt(1 + |Df|^2) deviates from 1 by {identity_err:.3e}")
    return MaximalResidual(residual=residual, lorentz_max=float(norm.max()), identity_err=identity_err)


def jorgens_chain(mg: MinimalGraph2D, grid: GridField) -> JorgensChain:
    """Legendre-Lewy transform of the Heinz potential with K = 1; checks Lap w = 1."""
    heinz = heinz_potential(mg, grid)
    w = ll_grid_transform(heinz.u, K=1.0).w
    values = np.where(w.defined(), w.values, np.nan)
    lap = laplacian(values, w.spacing)
    finite = np.isfinite(lap)
    if not finite.any():
        raise DomainError("no vertical node has a fully defined stencil")
    err = float(np.abs(lap[finite] - 1.0).max())
    logger.info("Jorgens chain: max |Lap w - 1| = %.3e over %d nodes", err, int(finite.sum()))
    return JorgensChain(laplacian_err=err, valid_nodes=int(finite.sum()))


def minimal_surface_jacobi_defect(mg: MinimalGraph2D, grid: GridField) -> MinimalSurfaceDefect:
    """Defects of Lap_g b = |grad_g b|^2 + |II|^2 for b = ln sqrt(1 + |Df|^2), and of
    Lap_g w + |II|^2 w = 0 for w = 1/sqrt(1 + |Df|^2), with fourth-order differences
    of the sampled height."""
    _require_box(grid)
    f = mg_derivatives(mg, grid.points()).value
    h = grid.spacing

    def d(values, axis):
        return derivative(values, h[axis], axis, order=1, accuracy=4)

    f1, f2 = d(f, 0), d(f, 1)
    f11 = derivative(f, h[0], 0, order=2, accuracy=4)
    f22 = derivative(f, h[1], 1, order=2, accuracy=4)
    f12 = d(f1, 1)
    W2 = 1.0 + f1**2 + f2**2
    W = np.sqrt(W2)
    g_inv = np.empty(f.shape + (2, 2))
    g_inv[..., 0, 0] = 1.0 - f1**2 / W2
    g_inv[..., 1, 1] = 1.0 - f2**2 / W2
    g_inv[..., 0, 1] = g_inv[..., 1, 0] = -f1 * f2 / W2
    II = np.stack([np.stack([f11, f12], -1), np.stack([f12, f22], -1)], -2) / W[..., None, None]
    shape_op = g_inv @ II
    II_sq = np.einsum("...ij,...ji->...", shape_op, shape_op)

    def laplace_beltrami(values):
        grads = np.stack([d(values, 0), d(values, 1)], axis=-1)
        flux = W[..., None] * np.einsum("...ij,...j->...i", g_inv, grads)
        return (d(flux[..., 0], 0) + d(flux[..., 1], 1)) / W, grads

    b = np.log(W)
    lap_b, grad_b = laplace_beltrami(b)
    grad_sq = np.einsum("...i,...ij,...j->...", grad_b, g_inv, grad_b)
    omega = 1.0 / W
    lap_omega, _ = laplace_beltrami(omega)

    jacobi = np.abs(lap_b - grad_sq - II_sq)
    field = np.abs(lap_omega + omega * II_sq)
    return MinimalSurfaceDefect(
        jacobi_defect=float(np.nanmax(jacobi)),
        jacobi_field_defect=float(np.nanmax(field)),
    )
