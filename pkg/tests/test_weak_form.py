import math

import numpy as np
import pytest

from errors import DomainError
from hessian.weak_form import (
    bump,
    bump_values,
    distributional_laplacian_sign,
    hessian_mass,
    integrate,
    surface_constant,
    very_weak_residual,
)
from hessian.zoo import LI_SINGULAR_RESOLVED, li_singular, quadratic, warren, zoo_eval
from models import GridField
from schemas import Section

ALIGNED_BUMPS = [
    ((0.0, 0.0), 0.5, (1.0, 1.0)),
    ((0.25, -0.125), 0.25, (1.0, 1.5)),
    ((-0.5, 0.25), 0.375, (1.0, 1.0)),
    ((0.125, 0.5), 0.25, (2.0, 1.0)),
    ((0.0, -0.25), 0.5, (1.5, 1.0)),
    ((-0.25, -0.25), 0.25, (1.0, 2.0)),
    ((0.5, 0.5), 0.25, (1.0, 1.0)),
    ((-0.375, 0.0), 0.5, (1.0, 1.25)),
    ((0.25, 0.25), 0.125, (2.0, 2.0)),
    ((0.0, 0.125), 0.75, (1.0, 1.0)),
]


def paraboloid2(h):
    return GridField.from_function(lambda x: 0.5 * np.sum(x**2, axis=-1), [-1, -1], [1, 1], h)


def test_bump_hessian_matches_finite_differences(rng):
    phi = bump([0.1, -0.2, 0.0], 0.6, [1.0, 0.5, 1.5])
    x = rng.uniform(-0.2, 0.2, size=(10, 3)) + np.array([0.1, -0.2, 0.0])
    h = 1e-4
    exact = bump_values(phi, x).hessian
    for i in range(3):
        for j in range(3):
            ei = np.zeros(3)
            ej = np.zeros(3)
            ei[i] = h
            ej[j] = h
            fd = (
                bump_values(phi, x + ei + ej).value
                - bump_values(phi, x + ei - ej).value
                - bump_values(phi, x - ei + ej).value
                + bump_values(phi, x - ei - ej).value
            ) / (4 * h * h)
            np.testing.assert_allclose(fd, exact[:, i, j], rtol=1e-5, atol=1e-4)


def test_bump_vanishes_outside_support():
    phi = bump([0.0, 0.0], 0.5)
    values = bump_values(phi, np.array([[0.6, 0.0], [0.0, -0.5], [0.3, 0.3]]))
    assert values.value[0] == 0.0 and values.value[1] == 0.0
    assert values.value[2] > 0
    assert bump_values(phi, np.zeros(2)).value == pytest.approx(1.0)


def test_support_must_lie_inside_the_grid():
    with pytest.raises(DomainError):
        integrate(bump([0.0, 0.0], 1.0), paraboloid2(0.125))
    with pytest.raises(DomainError):
        integrate(bump([0.0, 0.0, 0.0], 0.5), paraboloid2(0.125))


def test_bump_integral_converges():
    phi = bump([0.0, 0.0], 0.5)
    exact = (0.5 * 256 / 315) ** 2
    assert integrate(phi, paraboloid2(1 / 64)) == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("center, radius, scales", ALIGNED_BUMPS)
def test_paraboloid_residual_vanishes_in_the_limit(center, radius, scales):
    coarse = very_weak_residual(paraboloid2(1 / 32), bump(center, radius, scales))
    fine = very_weak_residual(paraboloid2(1 / 64), bump(center, radius, scales))
    assert abs(fine) <= 1e-3
    assert abs(fine) <= abs(coarse) / 3.5 or abs(fine) <= 1e-12


@pytest.mark.slow
def test_warren_residual_second_order():
    s = warren(3)

    residuals = []
    for h in (1 / 8, 1 / 16, 1 / 32):
        u = GridField.from_function(lambda x: zoo_eval(s, x, order=0).value, [-1] * 3, [1] * 3, h)
        residuals.append(abs(very_weak_residual(u, bump([0.0, 0.0, 0.0], 0.5))))
    assert residuals[2] < residuals[1] < residuals[0]
    assert math.log2(residuals[1] / residuals[2]) >= 1.8


def test_surface_constant():
    assert surface_constant(2) == pytest.approx(2 * math.pi)
    assert surface_constant(3) == pytest.approx(4 * math.pi)


def test_hessian_mass_of_paraboloid(paraboloid3, grid_of):
    mass = hessian_mass(grid_of(paraboloid3, 1.0, 0.125))
    assert mass.asserted
    assert mass.off_cone_nodes == 0
    assert mass.l1_hessian / mass.trace_integral == pytest.approx(1 / math.sqrt(3))
    assert mass.gradient_bound == pytest.approx(1.0)
    assert mass.surface_constant == pytest.approx(4 * math.pi)


def test_hessian_mass_of_warren(warren3, grid_of):
    mass = hessian_mass(grid_of(warren3, 1.0, 0.125))
    assert mass.asserted
    assert mass.l1_hessian <= mass.trace_integral
    assert mass.trace_ratio is not None and mass.trace_ratio > 0


def test_hessian_mass_reports_negative_branch(grid_of):
    mass = hessian_mass(grid_of(quadratic(-np.eye(3)), 1.0, 0.25))
    assert not mass.asserted
    assert mass.off_cone_nodes > 0


def test_hessian_mass_needs_unit_ball(paraboloid3, grid_of):
    with pytest.raises(DomainError):
        hessian_mass(grid_of(paraboloid3, 0.5, 0.125))


def test_laplacian_section_of_smooth_solutions(warren3):
    profile = distributional_laplacian_sign(quadratic(np.diag([1.0, 1.0, 0.0])), Section(base=[0, 0, 0], direction=[1, 1, 1]))
    assert profile.sign_changes == 0
    assert all(p.laplacian == pytest.approx(2.0) for p in profile.points)

    profile = distributional_laplacian_sign(warren3, Section(base=[0.2, 0, 0], direction=[0, 0, 1], count=50))
    assert profile.sign_changes == 0
    assert min(p.laplacian for p in profile.points) > 0
    assert profile.divergence_slope is None


def test_laplacian_section_across_the_singular_set():
    s = li_singular(**LI_SINGULAR_RESOLVED)
    direction = [0.0] * 7 + [1.0]
    profile = distributional_laplacian_sign(s, Section(base=[0.0] * 8, direction=direction))
    assert profile.sign_changes == 1
    assert all(p.t != 0 for p in profile.points)


def test_oblique_section_across_the_singular_set():
    s = li_singular(**LI_SINGULAR_RESOLVED)
    profile = distributional_laplacian_sign(s, Section(base=[0.1] + [0.0] * 7, direction=[0.0] * 7 + [1.0], count=201))
    assert len(profile.points) == 200
    assert profile.divergence_slope is not None


def test_section_inside_the_singular_set_is_rejected():
    s = li_singular(**LI_SINGULAR_RESOLVED)
    with pytest.raises(DomainError):
        distributional_laplacian_sign(s, Section(base=[0.0] * 8, direction=[1.0] + [0.0] * 7))
