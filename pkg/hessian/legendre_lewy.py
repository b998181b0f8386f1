"""Legendre-Lewy transform of u + K|x|^2/2 at matrix, tensor and grid level.

Horizontal data (x, D^2 u = lambda) maps to vertical data (y = Du + Kx,
D^2 w = (D^2 u + K)^-1 = mu).  The vertical equation used throughout is the
polynomial form ``sigma_n(mu) * (1 - sigma2(1/mu - K)) = 0``.
"""
import logging
import math
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline
from scipy.spatial import cKDTree

from errors import (
    ConvexityError,
    DomainError,
    SemiconvexityError,
    SingularityError,
)
from hessian.core import GAP_TOL, SpectrumLike, as_array, check_symmetric, sigma_k
from hessian.jacobi import check_constraints, jacobi_gap
from hessian.stencils import second_differences
from models import GridField, Tensor3, tensor_basis
from schemas import (
    JacobiQuantity,
    QuantityKind,
    Spectrum,
    TransformationCheck,
    VerticalPoint,
    VerticalResiduals,
)

logger = logging.getLogger(__name__)

ALMOST_CONVEX_TOL = 1e-12
SIGN_TOL = 1e-12


def ll_point_transform(H, K: float) -> Tuple[np.ndarray, VerticalPoint]:
    H = check_symmetric(H)
    if K <= 0:
        raise DomainError("the shift K must be positive")
    lam, V = np.linalg.eigh(H)
    if lam[0] + K <= 0:
        raise SemiconvexityError(float(lam[0]), K)
    mu = 1.0 / (lam + K)
    M = (V * mu) @ V.T
    point = VerticalPoint(mu=Spectrum.of(mu), K=K, delta=float(lam[0] + K))
    return 0.5 * (M + M.T), point


def ll_point_inverse(M, K: float) -> np.ndarray:
    M = check_symmetric(M)
    mu, V = np.linalg.eigh(M)
    if mu[0] <= 0:
        raise DomainError("vertical Hessian must be positive definite")
    H = (V / mu) @ V.T - K * np.eye(M.shape[0])
    return 0.5 * (H + H.T)


def almost_convex_applies(n: int, K: float) -> bool:
    return abs(K - math.sqrt(2.0 / (n * (n - 1)))) <= ALMOST_CONVEX_TOL


def vertical_residuals_batch(mu: np.ndarray, K: float) -> Dict[str, Optional[np.ndarray]]:
    """All vertical equation residuals over the last axis of ``mu``."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0):
        raise DomainError("vertical eigenvalues must be positive")
    n = mu.shape[-1]
    s = [sigma_k(mu, k) for k in range(n + 1)]
    lam = 1.0 / mu - K
    out: Dict[str, Optional[np.ndarray]] = {
        "enue": 1.0 - sigma_k(lam, 2),
        "ratio_form": s[n - 2] / s[n] - (n - 1) * K * s[n - 1] / s[n] + n * (n - 1) * K**2 / 2 - 1.0,
        "poly3": None,
        "enc": None,
    }
    if n == 3:
        out["poly3"] = -s[1] + 2 * K * s[2] - (3 * K**2 - 1) * s[3]
    if almost_convex_applies(n, K):
        out["enc"] = s[n - 1] / s[n - 2] - 1.0 / ((n - 1) * K)
    return out


def vertical_residuals(v: VerticalPoint, n: Optional[int] = None) -> VerticalResiduals:
    mu = v.mu.array()
    if n is not None and n != mu.size:
        raise DomainError(f"vertical point has {mu.size} eigenvalues, expected {n}")
    out = vertical_residuals_batch(mu, v.K)
    return VerticalResiduals(**{k: None if val is None else float(val) for k, val in out.items()})


def superharmonic_quantity(v: VerticalPoint) -> float:
    mu = v.mu.array()
    n = mu.size
    denominator = float(sigma_k(mu, n - 1))
    if denominator == 0:
        raise SingularityError("sigma_{n-1}(mu) vanishes")
    return float(sigma_k(mu, n)) / denominator


def third_order_pushforward(lam: SpectrumLike, c: Tensor3, K: float) -> Tensor3:
    """``c'_abc = -mu_a mu_b mu_c c_abc`` in the common eigenbasis."""
    lam = as_array(lam)
    if lam.min() + K <= 0:
        raise SemiconvexityError(float(lam.min()), K)
    mu = 1.0 / (lam + K)
    weights = np.array([-mu[a] * mu[b] * mu[c_] for a, b, c_ in tensor_basis(lam.size).triples])
    return Tensor3(lam.size, weights * c.entries)


def pushforward_full(H: np.ndarray, D3: np.ndarray, K: float) -> np.ndarray:
    """Vertical third derivatives ``w_abc = -M_ai M_bj M_ck u_ijk`` in coordinates."""
    M, _ = ll_point_transform(H, K)
    return -np.einsum("ai,bj,ck,ijk->abc", M, M, M, D3)


class _VerticalEquation:
    """First and second derivatives of ``H(mu) = sigma_n(mu) (1 - sigma2(1/mu - K))``."""

    def __init__(self, mu: np.ndarray, K: float):
        n = mu.size
        lam = 1.0 / mu - K
        S = lam.sum()
        P = float(np.prod(mu))
        Q = 1.0 - float(sigma_k(lam, 2))
        Qi = (S - lam) / mu**2
        Qij = -1.0 / np.outer(mu**2, mu**2)
        np.fill_diagonal(Qij, -2.0 * (S - lam) / mu**3)
        Pi = P / mu
        Pij = P / np.outer(mu, mu)
        np.fill_diagonal(Pij, 0.0)
        self.mu = mu
        self.value = P * Q
        self.grad = Pi * Q + P * Qi
        self.hess = Pij * Q + np.outer(Pi, Qi) + np.outer(Qi, Pi) + P * Qij
        self.n = n

    def divided(self) -> np.ndarray:
        """``(h_i - h_j) / (mu_i - mu_j)``, with the ``h_ii - h_ij`` limit on clusters."""
        mu, h, hh = self.mu, self.grad, self.hess
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                if i == j:
                    continue
                if abs(mu[i] - mu[j]) < GAP_TOL * max(1.0, abs(mu[i])):
                    out[i, j] = 0.5 * (hh[i, i] + hh[j, j]) - hh[i, j]
                else:
                    out[i, j] = (h[i] - h[j]) / (mu[i] - mu[j])
        return out

    def second(self, X: np.ndarray, Y: np.ndarray, divided: np.ndarray) -> float:
        """``d^2 H[X, Y]`` for symmetric X, Y in the eigenbasis."""
        dX, dY = np.diag(X), np.diag(Y)
        off = X * Y * divided
        return float(dX @ self.hess @ dY + off.sum())


def vertical_superharmonicity(mu: np.ndarray, K: float, w3: np.ndarray) -> float:
    """``Lap_H a`` for ``a = 1/tr(M^-1)`` with D^4 w eliminated by the equation.

    ``w3[:, :, k]`` is ``d_k D^2 w`` in the eigenbasis of ``M = diag(mu)``.
    """
    eq = _VerticalEquation(mu, K)
    divided = eq.divided()
    n = mu.size
    s = float(np.sum(1.0 / mu))
    total = 0.0
    Y_diag = np.zeros(n)
    for k in range(n):
        X = w3[:, :, k]
        ds = -float(np.sum(np.diag(X) / mu**2))
        d2s = 2.0 * float(np.sum(X**2 / np.outer(mu**2, mu)))
        d2A = 2.0 * ds**2 / s**3 - d2s / s**2
        total += eq.grad[k] * d2A
    for p in range(n):
        Y_diag[p] = -eq.second(w3[:, :, p], w3[:, :, p], divided)
    total += float(np.sum(Y_diag / (mu**2 * s**2)))
    return total


def transformation_rule_check(
    lam: SpectrumLike, c: Tensor3, K: float, tol: float = SIGN_TOL
) -> TransformationCheck:
    """Horizontal shifted-trace gap against vertical superharmonicity of ``a``."""
    lam = as_array(lam)
    n = lam.size
    if lam.min() + K <= 0:
        raise SemiconvexityError(float(lam.min()), K)
    check_constraints(lam, c)
    q = JacobiQuantity(kind=QuantityKind.SHIFTED_TRACE, K=K)
    gap = jacobi_gap(lam, c, q)
    mu = 1.0 / (lam + K)
    a = float(sigma_k(mu, n) / sigma_k(mu, n - 1))
    identity_err = abs(a - 1.0 / float(np.sum(lam + K)))
    vertical = vertical_superharmonicity(mu, K, third_order_pushforward(lam, c, K).full())
    predicted = float(np.prod(mu)) * a
    factor = -vertical / gap if abs(gap) > tol else None
    scale = max(1.0, abs(gap))
    return TransformationCheck(
        horizontal_gap=gap,
        vertical_value=vertical,
        sign_consistent=(gap >= -tol * scale) == (vertical <= tol * scale),
        a=a,
        a_identity_err=identity_err,
        factor=factor,
        predicted_factor=predicted,
    )


def _spline_degree(shape) -> int:
    smallest = min(shape)
    if smallest >= 6:
        return 5
    if smallest >= 4:
        return 3
    return 1


def tensor_spline(grid: GridField, values: Optional[np.ndarray] = None) -> NdBSpline:
    """Tensor-product interpolating B-spline through the node values."""
    k = _spline_degree(grid.shape)
    coeffs = grid.values if values is None else values
    knots = []
    for axis, x in enumerate(grid.axes):
        moved = np.moveaxis(coeffs, axis, 0)
        spl = make_interp_spline(x, moved, k=k)
        knots.append(spl.t)
        coeffs = np.moveaxis(spl.c, 0, axis)
    return NdBSpline(tuple(knots), coeffs, k)


def _derivatives(spline: NdBSpline, x: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    value = spline(x)
    grad = np.empty(x.shape[:-1] + (n,))
    hess = np.empty(x.shape[:-1] + (n, n))
    for i in range(n):
        nu = np.zeros(n, dtype=int)
        nu[i] = 1
        grad[..., i] = spline(x, nu=nu)
        for j in range(i, n):
            nu2 = nu.copy()
            nu2[j] += 1
            hess[..., i, j] = hess[..., j, i] = spline(x, nu=nu2)
    return value, grad, hess


class GridTransform(NamedTuple):
    w: GridField
    roundtrip_err: float
    preimage: np.ndarray
    mask: np.ndarray


def ll_grid_transform(u: GridField, K: float, max_iter: int = 40, tol: float = 1e-12) -> GridTransform:
    """Discrete Legendre transform of ``v = u + K|x|^2/2``.

    The gradient map of the spline interpolant of ``v`` is inverted node by
    node with damped Newton steps; vertical nodes outside the gradient image
    get no preimage and are masked out.
    """
    if K < 0:
        raise DomainError("K must be nonnegative")
    n = u.n
    x_nodes = u.points()
    v_values = u.values + 0.5 * K * np.sum(x_nodes**2, axis=-1)

    hessians = second_differences(v_values, u.spacing)
    eig_min = np.linalg.eigvalsh(hessians)[..., 0]
    if np.any(eig_min <= 0):
        node = np.unravel_index(int(np.argmin(eig_min)), eig_min.shape)
        raise ConvexityError([i + 1 for i in node], float(eig_min[node]))

    spline = tensor_spline(u, v_values)
    flat_x = x_nodes.reshape(-1, n)
    _, grad_nodes, _ = _derivatives(spline, flat_x, n)
    lower, upper = grad_nodes.min(axis=0), grad_nodes.max(axis=0)
    spacing = (upper - lower) / (np.asarray(u.shape) - 1)
    vertical = GridField(
        origin=tuple(lower.tolist()),
        spacing=tuple(spacing.tolist()),
        values=np.zeros(u.shape),
    )
    y = vertical.points().reshape(-1, n)

    tree = cKDTree(grad_nodes)
    _, nearest = tree.query(y)
    x = flat_x[nearest].copy()
    box_lo = np.asarray(u.origin)
    box_hi = u.upper
    scale = max(1.0, float(np.abs(grad_nodes).max()))

    _, g, Hs = _derivatives(spline, x, n)
    r = g - y
    res = np.linalg.norm(r, axis=-1)
    stalled = np.zeros(res.size, dtype=bool)
    for it in range(max_iter):
        active = (res > tol * scale) & ~stalled
        if not active.any():
            break
        step = np.linalg.solve(Hs[active], r[active][..., None])[..., 0]
        alpha = np.ones(active.sum())
        x_act = x[active]
        res_act = res[active]
        for _ in range(20):
            trial = np.clip(x_act - alpha[:, None] * step, box_lo, box_hi)
            _, g_t, _ = _derivatives(spline, trial, n)
            res_t = np.linalg.norm(g_t - y[active], axis=-1)
            worse = res_t >= res_act
            if not worse.any():
                break
            alpha = np.where(worse, 0.5 * alpha, alpha)
        # a failed line search keeps the previous iterate and retires the node
        x[active] = np.where(worse[:, None], x_act, trial)
        stalled[np.flatnonzero(active)[worse]] = True
        _, g, Hs = _derivatives(spline, x, n)
        r = g - y
        res = np.linalg.norm(r, axis=-1)
        logger.debug("gradient inversion iteration %d: %d nodes above tolerance", it, int(active.sum()))
    if stalled.any():
        logger.warning("gradient inversion stalled at %d nodes; their last accepted iterates are kept", int(stalled.sum()))

    valid = res <= 1e3 * tol * scale
    v_at, _, _ = _derivatives(spline, x, n)
    w_flat = np.where(valid, np.sum(x * y, axis=-1) - v_at, np.nan)
    mask = valid.reshape(u.shape)
    w = vertical.with_values(w_flat.reshape(u.shape), mask=mask)
    preimage = np.where(valid[:, None], x, np.nan).reshape(u.shape + (n,))

    roundtrip = _roundtrip_error(w, preimage)
    logger.info("Legendre-Lewy grid transform: %d of %d nodes valid, roundtrip %.3e", int(valid.sum()), valid.size, roundtrip)
    return GridTransform(w=w, roundtrip_err=roundtrip, preimage=preimage, mask=mask)


def _roundtrip_error(w: GridField, preimage: np.ndarray) -> float:
    """max |D_h w(y) - x(y)| over nodes whose full central stencil is valid."""
    n = w.n
    values = np.where(w.defined(), w.values, np.nan)
    err = np.zeros(tuple(s - 2 for s in w.shape))
    inner = (slice(1, -1),) * n
    for a in range(n):
        hi = [slice(1, -1)] * n
        lo = [slice(1, -1)] * n
        hi[a] = slice(2, None)
        lo[a] = slice(None, -2)
        d = (values[tuple(hi)] - values[tuple(lo)]) / (2 * w.spacing[a])
        err = np.maximum(err, np.abs(d - preimage[inner + (a,)]))
    finite = np.isfinite(err)
    if not finite.any():
        return float("nan")
    return float(err[finite].max())
