"""Pointwise Jacobi inequalities as constrained quadratic forms in D^3 u.

Everything lives in the eigenbasis of D^2 u, where the linearized operator is
``F = diag(f)`` with ``f_i = Lap u - lambda_i``.  Differentiating sigma2 = 1
once gives the constraints ``sum_i f_i c_iik = 0``; differentiating twice
eliminates fourth derivatives:

    Lap_F(Lap u) = sum_k (sum_ab c_abk^2 - v_k^2),   v_k = sum_i c_iik.
"""
import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import eigh, null_space
from scipy.optimize import minimize

from dependencies import get_rng
from errors import ConstraintError, DegenerateEigenvalueError, DomainError, SamplingError, UnsupportedError
from hessian.core import (
    CONSTRAINT_TOL,
    GAP_TOL,
    SpectrumLike,
    as_array,
    dynamic_constant,
    extreme_configuration,
    sample_on_branch,
    sigma_k,
)
from models import Tensor3, TensorBasis, tensor_basis
from schemas import (
    GapCertificate,
    JacobiQuantity,
    QuantityKind,
    ScanConfig,
    ScanResult,
    Spectrum,
    ThresholdResult,
)

logger = logging.getLogger(__name__)

VIOLATION_TOL = 1e-8


def kappa_for(lam: np.ndarray, q: JacobiQuantity) -> float:
    if q.kappa is not None:
        return q.kappa
    if q.kind != QuantityKind.ALMOST_JACOBI:
        return 1.0
    n = lam.size
    ratio = lam.min() / lam.sum()
    if n == 3:
        return 1.0 / 3.0
    if n == 4:
        return 0.5 + ratio
    return dynamic_constant(n) + ratio


def _check_branch(lam: np.ndarray, q: JacobiQuantity) -> None:
    if lam.size < 2:
        raise DomainError("need n >= 2")
    trace = lam.sum()
    if trace <= 0:
        raise DomainError("Jacobi quantities need a positive Laplacian")
    if q.kind == QuantityKind.SHIFTED_TRACE and trace + lam.size * q.K <= 0:
        raise DomainError("ln(Lap u + nK) needs a positive argument")
    if q.kind == QuantityKind.LOG_LAMBDA_MAX and lam.max() + q.K <= 0:
        raise DomainError("ln(lambda_max + K) needs a positive argument")


def _top_index(lam: np.ndarray) -> int:
    order = np.argsort(lam)[::-1]
    if lam[order[0]] - lam[order[1]] < GAP_TOL:
        raise DegenerateEigenvalueError(
            f"top eigenvalue gap {lam[order[0]] - lam[order[1]]:.3e} below {GAP_TOL:g}"
        )
    return int(order[0])


def constraint_matrix(lam: np.ndarray, basis: TensorBasis) -> np.ndarray:
    """Rows ``k``: the functional ``sum_i f_i c_iik`` in orthonormal coordinates."""
    n = lam.size
    f = lam.sum() - lam
    phi = np.zeros((n, n, n, n))
    for k in range(n):
        for i in range(n):
            phi[i, i, k, k] = f[i]
    return basis.pullback(phi).T


def _entry(basis: TensorBasis, a: int, b: int, c: int) -> np.ndarray:
    e = np.zeros((basis.n,) * 3)
    e[a, b, c] = 1.0
    return basis.pullback(e)[:, 0]


def _trace_functionals(basis: TensorBasis) -> np.ndarray:
    n = basis.n
    psi = np.zeros((n, n, n, n))
    for k in range(n):
        for i in range(n):
            psi[i, i, k, k] = 1.0
    return basis.pullback(psi).T


class JacobiForm(NamedTuple):
    Q: np.ndarray
    A: np.ndarray
    kappa: float
    basis: TensorBasis


def jacobi_form(lam: SpectrumLike, q: JacobiQuantity) -> JacobiForm:
    """The gap ``G(c) = x^T Q x`` and constraints ``A x = 0`` in orthonormal coordinates."""
    lam = as_array(lam)
    _check_branch(lam, q)
    n = lam.size
    basis = tensor_basis(n)
    kappa = kappa_for(lam, q)
    f = lam.sum() - lam
    trace_rows = _trace_functionals(basis)

    if q.kind == QuantityKind.LOG_LAMBDA_MAX:
        m = _top_index(lam)
        p = lam[m] + q.K
        Q = np.zeros((basis.dim, basis.dim))
        for a in range(n):
            for b in range(n):
                e = _entry(basis, a, b, m)
                Q += np.outer(e, e) / p
        Q -= np.outer(trace_rows[m], trace_rows[m]) / p
        for k in range(n):
            e_mm = _entry(basis, m, m, k)
            Q -= (1.0 + kappa) * f[k] / p**2 * np.outer(e_mm, e_mm)
            for j in range(n):
                if j != m:
                    e = _entry(basis, m, j, k)
                    Q += 2.0 * f[k] / (lam[m] - lam[j]) / p * np.outer(e, e)
    else:
        shift = n * q.K if q.kind == QuantityKind.SHIFTED_TRACE else 0.0
        v = lam.sum() + shift
        Q = np.eye(basis.dim) / v
        for k in range(n):
            weight = 1.0 / v + (1.0 + kappa) * f[k] / v**2
            Q -= weight * np.outer(trace_rows[k], trace_rows[k])
    return JacobiForm(0.5 * (Q + Q.T), constraint_matrix(lam, basis), kappa, basis)


class _SliceMoments(NamedTuple):
    v: float
    f: np.ndarray
    s2: np.ndarray
    d: np.ndarray


def _slice_moments(lam: np.ndarray, q: JacobiQuantity) -> _SliceMoments:
    """Weighted moments of ``f`` per slice ``k`` for the trace quantities.

    The entry ``c_iik`` enters only the trace and the constraint of slice ``k``
    and has weight 3 in the norm (weight 1 when ``i = k``), so each slice is a
    Rayleigh problem in two functionals.  ``d = s0 s2 - s1^2`` is the largest
    squared trace per unit norm on the constrained slice, times ``s2``.
    """
    if q.kind == QuantityKind.LOG_LAMBDA_MAX:
        raise UnsupportedError("slice moments cover the trace quantities only")
    n = lam.size
    f = lam.sum() - lam
    shift = n * q.K if q.kind == QuantityKind.SHIFTED_TRACE else 0.0
    inv_w = np.full((n, n), 1.0 / 3.0)
    np.fill_diagonal(inv_w, 1.0)
    s0 = inv_w.sum(axis=1)
    s1 = inv_w @ f
    s2 = inv_w @ f**2
    return _SliceMoments(float(lam.sum() + shift), f, s2, s0 * s2 - s1**2)


def slice_gaps(lam: SpectrumLike, q: JacobiQuantity) -> np.ndarray:
    """Closed-form smallest gap on each slice; their minimum is the certified gap."""
    lam = as_array(lam)
    _check_branch(lam, q)
    m = _slice_moments(lam, q)
    weight = 1.0 / m.v + (1.0 + kappa_for(lam, q)) * m.f / m.v**2
    return 1.0 / m.v - weight * m.d / m.s2


def sharp_kappa(lam: SpectrumLike, q: JacobiQuantity) -> float:
    """Largest coefficient of ``|grad_F b|^2`` whose gap stays nonnegative at ``lam``.

    ``+inf`` when no slice carries a trace (all eigenvalues equal).
    """
    lam = as_array(lam)
    _check_branch(lam, q)
    m = _slice_moments(lam, q)
    active = (m.d > CONSTRAINT_TOL * m.s2) & (m.f > 0)
    if not active.any():
        return float("inf")
    bounds = m.v * (m.s2[active] - m.d[active]) / (m.f[active] * m.d[active]) - 1.0
    return float(bounds.min())


def check_constraints(lam: np.ndarray, c: Tensor3, tol: float = CONSTRAINT_TOL) -> float:
    full = c.full()
    f = lam.sum() - lam
    residual = float(np.abs(np.einsum("i,iik->k", f, full)).max(initial=0.0))
    scale = max(1.0, float(np.abs(f).max()) * c.norm())
    if residual > tol * scale:
        raise ConstraintError(f"linearized constraint violated by {residual:.3e}")
    return residual


def jacobi_terms(lam: SpectrumLike, c: Tensor3, q: JacobiQuantity) -> Tuple[float, float]:
    """``(Lap_F b, |grad_F b|^2)`` by direct contraction of the full tensor."""
    lam = as_array(lam)
    _check_branch(lam, q)
    check_constraints(lam, c)
    full = c.full()
    f = lam.sum() - lam
    v_k = np.einsum("iik->k", full)
    if q.kind == QuantityKind.LOG_LAMBDA_MAX:
        m = _top_index(lam)
        p = lam[m] + q.K
        lap_lambda = np.sum(full[:, :, m] ** 2) - v_k[m] ** 2
        for k in range(c.n):
            for j in range(c.n):
                if j != m:
                    lap_lambda += 2.0 * f[k] * full[m, j, k] ** 2 / (lam[m] - lam[j])
        grad_sq = float(np.sum(f * full[m, m, :] ** 2) / p**2)
        return float(lap_lambda / p - grad_sq), grad_sq
    shift = c.n * q.K if q.kind == QuantityKind.SHIFTED_TRACE else 0.0
    v = lam.sum() + shift
    lap_trace = np.sum(full**2) - np.sum(v_k**2)
    grad_sq = float(np.sum(f * v_k**2) / v**2)
    return float(lap_trace / v - grad_sq), grad_sq


def jacobi_gap(lam: SpectrumLike, c: Tensor3, q: JacobiQuantity) -> float:
    lam = as_array(lam)
    lap_b, grad_sq = jacobi_terms(lam, c, q)
    return lap_b - kappa_for(lam, q) * grad_sq


def project_admissible(lam: np.ndarray, coords: np.ndarray) -> np.ndarray:
    A = constraint_matrix(lam, tensor_basis(lam.size))
    Z = null_space(A)
    return Z @ (Z.T @ coords)


def certify_form(Q: np.ndarray, A: np.ndarray) -> Tuple[float, np.ndarray, int]:
    """Smallest eigenvalue of ``Q`` on ``ker A`` and a unit vector attaining it."""
    Z = null_space(A)
    if Z.shape[1] == 0:
        return 0.0, np.zeros(Q.shape[0]), 0
    w, V = eigh(Z.T @ Q @ Z)
    return float(w[0]), Z @ V[:, 0], Z.shape[1]


def certified_min_gap(
    lam: SpectrumLike,
    q: JacobiQuantity,
    sample_id: Optional[int] = None,
    jitter_seed: Optional[int] = None,
) -> GapCertificate:
    lam = as_array(lam)
    jitter = 0.0
    try:
        form = jacobi_form(lam, q)
    except DegenerateEigenvalueError:
        if jitter_seed is None:
            raise
        # split the top cluster and record the perturbation
        rng = get_rng(jitter_seed)
        jitter = 10 * GAP_TOL * max(1.0, float(np.abs(lam).max()))
        lam = lam + jitter * rng.standard_normal(lam.size)
        form = jacobi_form(lam, q)
    min_gap, x, dim = certify_form(form.Q, form.A)
    sharp = None if q.kind == QuantityKind.LOG_LAMBDA_MAX else sharp_kappa(lam, q)
    if sharp is not None and not np.isfinite(sharp):
        sharp = None
    return GapCertificate(
        spectrum=Spectrum.of(lam),
        min_gap=min_gap,
        minimizer=Tensor3.from_coords(lam.size, x).entries.tolist(),
        quantity=q,
        kappa=form.kappa,
        sharp_kappa=sharp,
        constraint_residual=float(np.abs(form.A @ x).max(initial=0.0)),
        subspace_dim=dim,
        jitter=jitter,
        sample_id=sample_id,
    )


def minimizer_tensor(cert: GapCertificate) -> Tensor3:
    return Tensor3(cert.spectrum.n, np.asarray(cert.minimizer))


def sample_admissible(n: int, K: float, seed: int, count: int) -> List[Tuple[Spectrum, Tensor3]]:
    if n < 3:
        raise DomainError("admissible sampling needs n >= 3")
    if count == 0:
        return []
    rng = get_rng(seed)
    spectra = sample_on_branch(n, K, rng, count)
    basis = tensor_basis(n)
    pairs = []
    for lam in spectra:
        coords = project_admissible(lam, rng.standard_normal(basis.dim))
        pairs.append((Spectrum.of(lam), Tensor3.from_coords(n, coords)))
    return pairs


def extreme_pool(n: int, K: float, margin: float, count: int = 24) -> np.ndarray:
    """Extreme configurations over a geometric range of scales that respect lambda_min >= -K."""
    rows = []
    for scale in np.geomspace(0.2, 200.0, count):
        lam = extreme_configuration(n, scale).array()
        if lam.min() >= -K + margin:
            rows.append(lam)
    return np.asarray(rows).reshape(-1, n)


def _spectrum_from_free(free: np.ndarray) -> Optional[np.ndarray]:
    s1 = free.sum()
    if s1 <= 0:
        return None
    lam1 = (1.0 - sigma_k(free, 2)) / s1
    return np.concatenate([[lam1], free])


class _Tracker:
    """Worst certificate with a sample-id tie-break, so the result is order independent."""

    def __init__(self):
        self.worst: Optional[GapCertificate] = None
        self.evaluations = 0
        self.violations = 0

    def offer(self, cert: GapCertificate) -> None:
        self.evaluations += 1
        if cert.min_gap < -VIOLATION_TOL:
            self.violations += 1
        if self.worst is None or (cert.min_gap, cert.sample_id) < (self.worst.min_gap, self.worst.sample_id):
            self.worst = cert


def manifold_scan(n: int, q: JacobiQuantity, K: float, cfg: ScanConfig) -> ScanResult:
    """Worst certified gap over the on-branch manifold with lambda_min >= -K.

    Half of the budget seeds a start pool (random on-branch spectra plus
    extreme configurations); the rest drives Nelder-Mead refinements from the
    worst starts in the free coordinates lambda_2..lambda_n.
    """
    rng = get_rng(cfg.seed)
    floor = -K + cfg.margin
    pool_size = max(1, cfg.budget // 2) if cfg.refine_starts else cfg.budget
    extremes = extreme_pool(n, K, cfg.margin)[:pool_size]
    randoms = sample_on_branch(n, K, rng, pool_size - extremes.shape[0], cfg.margin)
    pool = np.concatenate([extremes, randoms]) if extremes.size else randoms
    tracker = _Tracker()
    next_id = 0

    def admissible(lam: np.ndarray) -> bool:
        if lam.min() < floor or lam.sum() <= 0:
            return False
        if cfg.dynamic_only and dynamic_constant(n) + lam.min() / lam.sum() < 0:
            return False
        return True

    def evaluate(lam: np.ndarray) -> Optional[GapCertificate]:
        nonlocal next_id
        if not admissible(lam):
            return None
        cert = certified_min_gap(lam, q, sample_id=next_id, jitter_seed=cfg.seed + next_id)
        next_id += 1
        tracker.offer(cert)
        return cert

    scored = []
    for lam in pool:
        cert = evaluate(lam)
        if cert is not None:
            scored.append((cert.min_gap, cert.sample_id, lam))
    if tracker.worst is None:
        raise SamplingError(f"no admissible spectrum found for n={n}, K={K}")

    remaining = cfg.budget - tracker.evaluations
    scored.sort(key=lambda row: (row[0], row[1]))
    starts = scored[: cfg.refine_starts]
    for _, _, lam in starts:
        if remaining <= 0:
            break
        per_start = max(1, remaining // len(starts))
        before = tracker.evaluations

        def objective(free: np.ndarray) -> float:
            lam_full = _spectrum_from_free(free)
            if lam_full is None or tracker.evaluations - before >= per_start:
                return 1e6
            cert = evaluate(lam_full)
            return 1e6 if cert is None else cert.min_gap

        minimize(objective, lam[1:], method="Nelder-Mead", options={"maxfev": per_start, "xatol": 1e-10, "fatol": 1e-14})
        remaining -= tracker.evaluations - before

    logger.info(
        "scan n=%d %s: worst gap %.3e after %d evaluations (%d violations)",
        n, q.kind.value, tracker.worst.min_gap, tracker.evaluations, tracker.violations,
    )
    return ScanResult(
        worst=tracker.worst,
        evaluations=tracker.evaluations,
        violations=tracker.violations,
        budget=cfg.budget,
        seed=cfg.seed,
    )


def trace_threshold(n: int, K: float, budget: int, seed: int, q: Optional[JacobiQuantity] = None) -> ThresholdResult:
    """Smallest sampled Lap u above which every certified LogTrace gap is nonnegative.

    An exact sweep of the sampled Laplacians in increasing order; +inf when
    nothing qualifies.
    """
    q = q or JacobiQuantity(kind=QuantityKind.LOG_TRACE, K=K)
    if budget <= 0:
        return ThresholdResult(threshold=float("inf"), samples=0, failures=0, budget=budget, seed=seed, K=K)
    rng = get_rng(seed)
    extremes = extreme_pool(n, K, 1e-6)[:budget]
    spectra = np.concatenate([extremes, sample_on_branch(n, K, rng, budget - extremes.shape[0])])
    traces = spectra.sum(axis=1)
    gaps = np.array([certified_min_gap(lam, q, jitter_seed=seed).min_gap for lam in spectra])
    failing = gaps < -VIOLATION_TOL
    if not failing.any():
        threshold = float(traces.min())
    else:
        worst_trace = traces[failing].max()
        above = traces[traces > worst_trace]
        threshold = float(above.min()) if above.size else float("inf")
    logger.info("trace threshold n=%d K=%g: %g (%d of %d samples fail)", n, K, threshold, failing.sum(), budget)
    return ThresholdResult(
        threshold=threshold, samples=int(spectra.shape[0]), failures=int(failing.sum()), budget=budget, seed=seed, K=K
    )
