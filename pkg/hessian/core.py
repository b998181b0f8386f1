"""Elementary symmetric functions, branch classification and linearization.

Spectra are never sorted implicitly; anything that needs ``lambda_min`` takes
it explicitly.
"""
import logging
import math
from typing import NamedTuple, Union

import numpy as np

from errors import BranchError, DomainError, SamplingError, SymmetryError
from schemas import Branch, BranchReport, LinTrudingerRatios, RatioReport, Spectrum

logger = logging.getLogger(__name__)

BRANCH_TOL = 1e-8
SYMMETRY_TOL = 1e-12
GAP_TOL = 1e-7
CONSTRAINT_TOL = 1e-8

SpectrumLike = Union[Spectrum, np.ndarray, list, tuple]


def as_array(s: SpectrumLike) -> np.ndarray:
    if isinstance(s, Spectrum):
        return s.array()
    return np.asarray(s, dtype=float)


def sigma_k(values: np.ndarray, k: int) -> np.ndarray:
    """k-th elementary symmetric function over the last axis."""
    lam = np.asarray(values, dtype=float)
    n = lam.shape[-1]
    if not 0 <= k <= n:
        raise DomainError(f"k must lie in 0..{n}, got {k}")
    batch = lam.shape[:-1]
    e = [np.ones(batch)] + [np.zeros(batch) for _ in range(k)]
    for i in range(n):
        li = lam[..., i]
        for j in range(k, 0, -1):
            e[j] = e[j] + li * e[j - 1]
    return e[k]


def spectrum_sigma(s: SpectrumLike, k: int) -> float:
    return float(sigma_k(as_array(s), k))


def check_symmetric(H, tol: float = SYMMETRY_TOL) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        raise DomainError(f"expected square matrices, got shape {H.shape}")
    scale = max(1.0, float(np.abs(H).max(initial=0.0)))
    if np.abs(H - np.swapaxes(H, -1, -2)).max(initial=0.0) > tol * scale:
        raise SymmetryError("matrix is not symmetric within tolerance")
    return H


def classify_branch(sigma2, trace, tol: float = BRANCH_TOL):
    on_level = np.abs(np.asarray(sigma2) - 1.0) <= tol
    labels = np.where(
        on_level & (np.asarray(trace) > 0),
        Branch.POSITIVE.value,
        np.where(on_level & (np.asarray(trace) < 0), Branch.NEGATIVE.value, Branch.OFF_LEVEL_SET.value),
    )
    return labels


def sigma2_batch(H: np.ndarray) -> tuple:
    """(sigma2, trace, |H|^2) over stacks of matrices via the trace identity."""
    trace = np.trace(H, axis1=-2, axis2=-1)
    norm_sq = np.sum(H * H, axis=(-2, -1))
    return 0.5 * (trace**2 - norm_sq), trace, norm_sq


def sigma2_matrix(H, tol: float = BRANCH_TOL) -> BranchReport:
    H = check_symmetric(H)
    sigma2, trace, norm_sq = (float(x) for x in sigma2_batch(H))
    return BranchReport(
        sigma2=sigma2,
        trace=trace,
        hess_norm_sq=norm_sq,
        concave_residual=trace - math.sqrt(2.0 + norm_sq),
        branch=Branch(str(classify_branch(sigma2, trace, tol))),
    )


class LinearizedCoefficients(NamedTuple):
    F: np.ndarray
    Fc: np.ndarray
    F_posdef: bool
    Fc_posdef: bool


def linearized_coefficients(H) -> LinearizedCoefficients:
    H = check_symmetric(H)
    n = H.shape[0]
    eye = np.eye(n)
    F = np.trace(H) * eye - H
    Fc = eye - H / math.sqrt(2.0 + float(np.sum(H * H)))
    return LinearizedCoefficients(
        F=F,
        Fc=Fc,
        F_posdef=bool(np.linalg.eigvalsh(F)[0] > 0),
        Fc_posdef=bool(np.linalg.eigvalsh(Fc)[0] > 0),
    )


def lagrangian_phase(s: SpectrumLike) -> float:
    return float(np.sum(np.arctan(as_array(s))))


def extreme_configuration(n: int, K: float) -> Spectrum:
    if n < 3:
        raise DomainError("extreme configuration needs n >= 3")
    if K <= 0:
        raise DomainError("extreme configuration needs K > 0")
    last = -(n - 2) * K / 2 + 1.0 / ((n - 1) * K)
    return Spectrum.of([K] * (n - 1) + [last])


def dynamic_constant(n: int) -> float:
    """c_n = (sqrt(3n^2 + 1) - n + 1) / (2n)."""
    return (math.sqrt(3 * n * n + 1) - n + 1) / (2 * n)


def almost_convex_shift(n: int) -> float:
    return math.sqrt(2.0 / (n * (n - 1)))


def min_ratio(s: SpectrumLike, K: float = 0.0) -> RatioReport:
    lam = as_array(s)
    n = lam.size
    trace = float(lam.sum())
    if trace <= 0:
        raise BranchError(f"min_ratio needs a positive Laplacian, got {trace:.6g}")
    lam_min = float(lam.min())
    ratio = lam_min / trace
    return RatioReport(
        ratio=ratio,
        bound_ok=ratio > -(n - 2) / n,
        dynamic_ok=dynamic_constant(n) + ratio >= 0,
        semiconvex=lam_min >= -K,
    )


def lin_trudinger_ratios(s: SpectrumLike) -> LinTrudingerRatios:
    lam = np.sort(as_array(s))[::-1]
    trace = float(lam.sum())
    if trace <= 0:
        raise BranchError("ratios are defined on the positive branch")
    f = trace - lam
    l1 = float(lam[0])
    return LinTrudingerRatios(
        lambda_max=l1,
        f1_times_l1=float(f[0] * l1),
        f1_over_l1=float(f[0] / l1),
        fk_over_l1=(f[1:] / l1).tolist(),
    )


def sample_on_branch(
    n: int,
    K: float,
    rng: np.random.Generator,
    count: int,
    margin: float = 1e-6,
    max_rounds: int = 200,
) -> np.ndarray:
    """Random spectra on sigma2 = 1, trace > 0, with lambda_min >= -K + margin.

    lambda_2..lambda_n are drawn on a log-uniform scale above the floor and
    lambda_1 = (1 - sigma2(rest)) / sigma1(rest) solves the equation, which is
    linear in lambda_1.  The trace is positive iff sigma1(rest) > 0.
    """
    if n < 2:
        raise DomainError("need n >= 2")
    if K < 0:
        raise DomainError("K must be nonnegative")
    floor = -K + margin
    top = 10.0 * max(1.0, K)
    kept = []
    total = 0
    for _ in range(max_rounds):
        if total >= count:
            break
        batch = max(64, 4 * (count - total))
        scale = np.exp(rng.uniform(np.log(1e-2), np.log(top), size=(batch, 1)))
        rest = floor + scale * rng.random((batch, n - 1))
        s1 = sigma_k(rest, 1)
        s2 = sigma_k(rest, 2)
        ok = s1 > 0
        lam1 = np.where(ok, (1.0 - s2) / np.where(ok, s1, 1.0), -np.inf)
        ok &= lam1 >= floor
        if ok.any():
            accepted = np.column_stack([lam1[ok], rest[ok]])
            kept.append(accepted)
            total += accepted.shape[0]
    if total < count:
        raise SamplingError(
            f"only {total} of {count} on-branch spectra found for n={n}, K={K}"
        )
    if count == 0:
        return np.zeros((0, n))
    return np.concatenate(kept)[:count]
