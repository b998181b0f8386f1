"""Closed-form solutions with exact derivatives up to fourth order.

Every entry is a sum of separable terms ``P(x') * g(x_t)`` where ``P`` is a
quadratic polynomial in the coordinates other than ``x_t`` and ``g`` is an
exponential or a real power.  Fractional powers use sign-preserving odd-root
semantics: ``x^(p/q) = sign(x)^p |x|^(p/q)`` for odd ``q``, so ``x^(7/5)`` is
defined and odd on the whole line.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement, permutations
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DomainError, FitError
from hessian.core import classify_branch, sigma2_batch
from schemas import (
    Branch,
    BranchCensus,
    BranchJumpProfile,
    ClosedFormSolution,
    ProfilePoint,
    QuadraticFit,
    ResidualScan,
    SolutionKind,
)

logger = logging.getLogger(__name__)

Box = Union[float, Tuple[Sequence[float], Sequence[float]]]

LI_SINGULAR_RESOLVED = dict(a="7/5", b="3/5", c="17/5", gamma1="-25/84", gamma2="-25/34")
LI_SINGULAR_PRINTED = dict(a="7/5", b="3/5", c="14/5", gamma1="-25/84", gamma2="-25/28")


def as_fraction(exponent) -> Fraction:
    if isinstance(exponent, Fraction):
        return exponent
    if isinstance(exponent, float):
        return Fraction(exponent).limit_denominator(1000)
    return Fraction(exponent)


def falling_factorial(e: Fraction, m: int) -> Fraction:
    out = Fraction(1)
    for j in range(m):
        out *= e - j
    return out


def odd_root_power(x, exponent, derivative: int = 0) -> np.ndarray:
    """``d^m/dx^m`` of ``x^(p/q)`` with odd ``q`` and real odd-root semantics."""
    e = as_fraction(exponent)
    if e.denominator % 2 == 0:
        raise DomainError(f"exponent {e} has an even root")
    x = np.asarray(x, dtype=float)
    coeff = falling_factorial(e, derivative)
    if coeff == 0:
        return np.zeros_like(x)
    e_m = e - derivative
    if e_m < 0 and np.any(x == 0):
        raise DomainError(f"x^{e_m} is singular at 0")
    if e_m.denominator == 1 and e_m >= 0:
        return float(coeff) * x ** int(e_m)
    sign = np.sign(x) if e_m.numerator % 2 else np.ones_like(x)
    return float(coeff) * sign * np.abs(x) ** float(e_m)


@dataclass(frozen=True)
class Term:
    """``(x^T B x + b.x + beta) * g(x_t)`` with ``g`` = exp(rate t) or t^power.

    ``t_index=None`` is a pure quadratic with ``g = 1``.
    """

    t_index: Optional[int]
    B: np.ndarray
    b: np.ndarray
    beta: float
    rate: Optional[float] = None
    power: Optional[Fraction] = None

    def g(self, t: np.ndarray, m: int) -> np.ndarray:
        if self.rate is not None:
            return self.rate**m * np.exp(self.rate * t)
        return odd_root_power(t, self.power, m)

    def poly(self, x: np.ndarray, rest: Tuple[int, ...]) -> np.ndarray:
        if len(rest) == 0:
            return np.einsum("...i,ij,...j->...", x, self.B, x) + x @ self.b + self.beta
        if len(rest) == 1:
            i = rest[0]
            return 2.0 * (x @ self.B[i]) + self.b[i]
        if len(rest) == 2:
            return np.full(x.shape[:-1], 2.0 * self.B[rest[0], rest[1]])
        return np.zeros(x.shape[:-1])

    def partial(self, x: np.ndarray, index: Tuple[int, ...]) -> np.ndarray:
        if self.t_index is None:
            return self.poly(x, index)
        m = sum(1 for i in index if i == self.t_index)
        rest = tuple(i for i in index if i != self.t_index)
        if len(rest) > 2:
            return np.zeros(x.shape[:-1])
        return self.poly(x, rest) * self.g(x[..., self.t_index], m)


def _term(n, t_index, diag=(), linear=(), beta=0.0, rate=None, power=None) -> Term:
    B = np.zeros((n, n))
    for i, v in diag:
        B[i, i] = v
    b = np.zeros(n)
    for i, v in linear:
        b[i] = v
    return Term(t_index, B, b, beta, rate, None if power is None else as_fraction(power))


def terms_for(s: ClosedFormSolution) -> List[Term]:
    n = s.n
    if s.kind == SolutionKind.QUADRATIC:
        return [Term(None, 0.5 * np.asarray(s.A, dtype=float), np.zeros(n), 0.0)]
    if s.kind == SolutionKind.WARREN:
        return [
            _term(n, 2, diag=[(0, 1.0), (1, 1.0)], beta=-1.0, rate=1.0),
            _term(n, 2, beta=0.25, rate=-1.0),
        ]
    if s.kind == SolutionKind.LI_NONDEGENERATE:
        t = n - 1
        return [
            _term(n, t, diag=[(0, 1.0), (1, 1.0)], beta=-1.0, rate=1.0),
            _term(n, t, beta=(n - 2) / 4, rate=-1.0),
            _term(n, t, linear=[(i, 1.0) for i in range(2, n - 1)], power=1),
        ]
    return [
        _term(n, 7, diag=[(i, 1.0) for i in range(7)], power=s.a),
        _term(n, 7, beta=float(Fraction(s.gamma1)), power=s.b),
        _term(n, 7, beta=float(Fraction(s.gamma2)), power=s.c),
    ]


def warren(n: int = 3) -> ClosedFormSolution:
    return ClosedFormSolution(kind=SolutionKind.WARREN, n=n)


def li_nondegenerate(n: int) -> ClosedFormSolution:
    return ClosedFormSolution(kind=SolutionKind.LI_NONDEGENERATE, n=n)


def li_singular(**params) -> ClosedFormSolution:
    """LiSingular with explicit parameters; nothing is substituted silently."""
    return ClosedFormSolution(kind=SolutionKind.LI_SINGULAR, n=8, **params)


def quadratic(A) -> ClosedFormSolution:
    A = np.asarray(A, dtype=float)
    return ClosedFormSolution(kind=SolutionKind.QUADRATIC, n=A.shape[0], A=A.tolist())


def parse_solution(text: str, n: int) -> ClosedFormSolution:
    """``warren``, ``li``, ``li-singular``, ``li-singular-printed`` or ``quadratic:d1,d2,...``."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "warren":
        return warren(n)
    if name in ("li", "li-nondegenerate"):
        return li_nondegenerate(n)
    if name == "li-singular":
        return li_singular(**LI_SINGULAR_RESOLVED)
    if name == "li-singular-printed":
        return li_singular(**LI_SINGULAR_PRINTED)
    if name == "quadratic":
        diag = [float(v) for v in arg.split(",")] if arg else [1.0, 1.0] + [0.0] * (n - 2)
        return quadratic(np.diag(diag))
    raise DomainError(f"unknown solution {text!r}")


class ZooDerivatives(NamedTuple):
    value: Optional[np.ndarray]
    gradient: Optional[np.ndarray]
    hessian: Optional[np.ndarray]
    third: Optional[np.ndarray]
    fourth: Optional[np.ndarray]


def _tensor(terms: List[Term], x: np.ndarray, n: int, order: int) -> np.ndarray:
    out = np.zeros(x.shape[:-1] + (n,) * order)
    for index in combinations_with_replacement(range(n), order):
        total = sum(term.partial(x, index) for term in terms)
        for p in set(permutations(index)):
            out[(Ellipsis,) + p] = total
    return out


def check_domain(s: ClosedFormSolution, x: np.ndarray) -> None:
    if s.kind == SolutionKind.LI_SINGULAR and np.any(x[..., 7] == 0):
        raise DomainError("LiSingular is undefined on x8 = 0")


def zoo_eval(s: ClosedFormSolution, x, order: int = 2) -> ZooDerivatives:
    """Exact derivatives ``u, Du, ..., D^order u`` at points of shape ``(..., n)``."""
    if not 0 <= order <= 4:
        raise DomainError("order must lie in 0..4")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != s.n:
        raise DomainError(f"points must have {s.n} coordinates")
    check_domain(s, x)
    terms = terms_for(s)
    parts = [_tensor(terms, x, s.n, k) if k <= order else None for k in range(5)]
    return ZooDerivatives(*parts)


def _sample_box(box: Box, n: int, rng: np.random.Generator, count: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if np.isscalar(box):
        lower = -float(box) * np.ones(n)
        upper = float(box) * np.ones(n)
    else:
        lower = np.asarray(box[0], dtype=float)
        upper = np.asarray(box[1], dtype=float)
    return lower + (upper - lower) * rng.random((count, n)), lower, upper


def sample_points(s: ClosedFormSolution, box: Box, N: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    x, _, _ = _sample_box(box, s.n, rng, N)
    if s.kind == SolutionKind.LI_SINGULAR:
        x = x[x[:, 7] != 0]
    return x, zoo_eval(s, x, order=0).value


def growth_exponent(x: np.ndarray, u: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Optional[float]:
    """Least-squares slope of log max|u| against log radius over nested cubes."""
    centre = 0.5 * (lower + upper)
    half = 0.5 * (upper - lower)
    radius = np.max(np.abs(x - centre) / half, axis=-1)
    levels = np.geomspace(1.0 / 8, 1.0, 8)
    rows = []
    for r in levels:
        inside = radius <= r
        if inside.any():
            peak = np.max(np.abs(u[inside]))
            if peak > 0:
                rows.append((np.log(r * half.max()), np.log(peak)))
    if len(rows) < 2:
        return None
    rows = np.asarray(rows)
    return float(np.polyfit(rows[:, 0], rows[:, 1], 1)[0])


def residual_scan(s: ClosedFormSolution, box: Box, N: int, seed: int) -> ResidualScan:
    if N < 1:
        raise DomainError("need at least one sample")
    rng = np.random.default_rng(seed)
    x, lower, upper = _sample_box(box, s.n, rng, N)
    ok = np.ones(N, dtype=bool)
    if s.kind == SolutionKind.LI_SINGULAR:
        ok = x[:, 7] != 0
    x = x[ok]
    skipped = int(N - ok.sum())
    d = zoo_eval(s, x, order=2)
    sigma2, trace, _ = sigma2_batch(d.hessian)
    lam_min = np.linalg.eigvalsh(d.hessian)[:, 0]
    labels = classify_branch(sigma2, trace)
    census = BranchCensus(
        positive=int(np.sum(labels == Branch.POSITIVE.value)),
        negative=int(np.sum(labels == Branch.NEGATIVE.value)),
        off=int(np.sum(labels == Branch.OFF_LEVEL_SET.value)),
    )
    result = ResidualScan(
        solution=s.kind,
        samples=int(x.shape[0]),
        skipped=skipped,
        max_abs_residual=float(np.max(np.abs(sigma2 - 1.0))),
        min_lambda_min=float(lam_min.min()),
        mean_lambda_min=float(lam_min.mean()),
        branch=census,
        growth_exponent=growth_exponent(x, d.value, lower, upper),
    )
    logger.info(
        "%s: max |sigma2 - 1| = %.3e over %d samples", s.kind.value, result.max_abs_residual, result.samples
    )
    return result


def printed_li_residual(t) -> np.ndarray:
    """sigma2 - 1 of the printed LiSingular formula on the x8 axis."""
    t = np.asarray(t, dtype=float)
    x = np.zeros(t.shape + (8,))
    x[..., 7] = t
    sigma2, _, _ = sigma2_batch(zoo_eval(li_singular(**LI_SINGULAR_PRINTED), x).hessian)
    return sigma2 - 1.0


def branch_jump_profile(s: ClosedFormSolution, path: Sequence[float]) -> BranchJumpProfile:
    """Laplacian along the x8 axis (r = 0) and its log-log slope near 0."""
    if s.kind != SolutionKind.LI_SINGULAR:
        raise DomainError("branch jump profile is defined for LiSingular")
    t = np.asarray(path, dtype=float)
    if np.any(t == 0):
        raise DomainError("path touches the singular set x8 = 0")
    x = np.zeros((t.size, 8))
    x[:, 7] = t
    lap = np.trace(zoo_eval(s, x).hessian, axis1=-2, axis2=-1)
    near = (np.abs(t) <= 1e-2) & (t > 0)
    if near.sum() < 2:
        near = t > 0
    slope = None
    if near.sum() >= 2:
        slope = float(np.polyfit(np.log(t[near]), np.log(np.abs(lap[near])), 1)[0])
    return BranchJumpProfile(
        points=[ProfilePoint(t=float(a), laplacian=float(b)) for a, b in zip(t, lap)],
        slope=slope,
        sign_change=bool(np.any(lap > 0) and np.any(lap < 0)),
    )


def quadratic_fit(x: np.ndarray, u: np.ndarray) -> QuadraticFit:
    """Least-squares ``x^T A x / 2 + b.x + c`` through the samples."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    m, n = x.shape
    pairs = list(combinations_with_replacement(range(n), 2))
    columns = 1 + n + len(pairs)
    if m < columns:
        raise FitError(f"need at least {columns} samples, got {m}")
    design = np.column_stack([np.ones(m), x] + [x[:, i] * x[:, j] for i, j in pairs])
    if np.linalg.matrix_rank(design) < columns:
        raise FitError("samples are not in general position for a quadratic fit")
    coef, *_ = np.linalg.lstsq(design, u, rcond=None)
    A = np.zeros((n, n))
    for k, (i, j) in enumerate(pairs):
        w = coef[1 + n + k]
        if i == j:
            A[i, i] = 2 * w
        else:
            A[i, j] = A[j, i] = w
    return QuadraticFit(
        A=A.tolist(),
        b=coef[1 : n + 1].tolist(),
        c=float(coef[0]),
        max_dev=float(np.max(np.abs(design @ coef - u))),
    )
