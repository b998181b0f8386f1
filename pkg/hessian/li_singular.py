"""Symbolic resolution of the singular eight-dimensional ansatz.

    u = (x1^2 + ... + x7^2) x8^a + g1 x8^b + g2 x8^c

sigma2(D^2 u) - 1 is expanded as a polynomial in r2 = x1^2 + ... + x7^2 with
power-of-x8 coefficients, and every coefficient is forced to vanish.
"""
import logging
from itertools import permutations
from typing import Dict, List

import sympy as sp

from errors import ResolutionError
from schemas import LiResolution

logger = logging.getLogger(__name__)

N_ROTATIONAL = 7


def _sigma2(H: sp.Matrix) -> sp.Expr:
    trace = sum(H[i, i] for i in range(H.rows))
    return (trace**2 - sum(e**2 for e in H)) / 2


def ansatz_residual(a, b, c, g1, g2) -> sp.Expr:
    """sigma2 - 1 on the ray x = (sqrt(r2), 0, ..., 0, t), as an expression in r2, t."""
    xs = sp.symbols(f"x1:{N_ROTATIONAL + 1}", real=True)
    t = sp.Symbol("t", positive=True)
    r2 = sp.Symbol("r2", nonnegative=True)
    u = sum(x**2 for x in xs) * t**a + g1 * t**b + g2 * t**c
    H = sp.hessian(u, list(xs) + [t])
    point = {xs[0]: sp.sqrt(r2)}
    point.update({x: 0 for x in xs[1:]})
    expr = sp.expand(_sigma2(H).subs(point) - 1)
    return sp.powsimp(expr, force=True)


def _group_by_power(expr: sp.Expr, t: sp.Symbol) -> Dict[sp.Expr, sp.Expr]:
    groups: Dict[sp.Expr, sp.Expr] = {}
    for term in sp.Add.make_args(expr):
        coeff, power = sp.powsimp(term, force=True).as_coeff_exponent(t)
        groups[power] = groups.get(power, 0) + coeff
    groups = {p: sp.factor(c) for p, c in groups.items()}
    return {p: c for p, c in groups.items() if c != 0}


def resolve_li_singular() -> LiResolution:
    a, b, c = sp.symbols("a b c", real=True)
    g1, g2 = sp.symbols("gamma1 gamma2", real=True)
    t = sp.Symbol("t", positive=True)
    r2 = sp.Symbol("r2", nonnegative=True)

    expr = ansatz_residual(a, b, c, g1, g2)
    radial = sp.powsimp(sp.expand(expr).coeff(r2), force=True).subs(t, 1)
    a_values = [v for v in sp.solve(sp.Eq(radial, 0), a) if v != 0]
    logger.debug("radial coefficient %s gives a in %s", radial, a_values)

    solutions: List[Dict[sp.Symbol, sp.Expr]] = []
    for a_value in a_values:
        rest = sp.powsimp(sp.expand(expr.subs(a, a_value)).coeff(r2, 0), force=True)
        groups = _group_by_power(rest, t)
        fixed = {p: q for p, q in groups.items() if not p.free_symbols}
        free = {p: q for p, q in groups.items() if p.free_symbols}
        for order in permutations(list(free), len(fixed)):
            equations = []
            for target, p in zip(fixed, order):
                equations.append(sp.Eq(p, target))
                equations.append(sp.Eq(free[p] + fixed[target], 0))
            for sol in sp.solve(equations, [b, c, g1, g2], dict=True):
                if set(sol) != {b, c, g1, g2}:
                    continue
                sol[a] = a_value
                if sol[b] < sol[c] and sol not in solutions:
                    solutions.append(sol)

    if not solutions:
        raise ResolutionError("no parameters make the residual vanish")
    best = solutions[0]
    check = sp.simplify(ansatz_residual(*(best[s] for s in (a, b, c, g1, g2))))
    printed = sp.simplify(
        ansatz_residual(sp.Rational(7, 5), sp.Rational(3, 5), sp.Rational(14, 5),
                        sp.Rational(-25, 84), sp.Rational(-25, 28))
    )
    logger.info("resolved (c, gamma2) = (%s, %s); printed pair leaves %s", best[c], best[g2], printed)
    return LiResolution(
        a=str(best[a]),
        b=str(best[b]),
        c=str(best[c]),
        gamma1=str(best[g1]),
        gamma2=str(best[g2]),
        residual_vanishes=check == 0,
        printed_residual=str(printed),
        solutions_found=len(solutions),
    )
