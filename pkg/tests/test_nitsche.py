import math

import numpy as np
import pytest
from pydantic import ValidationError

from errors import DomainError, IntegrabilityError, UnsupportedError
from hessian.nitsche import (
    conjugate_functions,
    heinz_potential,
    jorgens_chain,
    maximal_residual,
    mg_derivatives,
    mg_grid,
    minimal_surface_jacobi_defect,
    minimal_surface_residual,
    plane,
    scherk,
)


def test_scherk_is_minimal(rng):
    points = rng.uniform(-1.4, 1.4, size=(500, 2))
    assert minimal_surface_residual(scherk(1.4), points) <= 1e-10


def test_scherk_patch_must_avoid_the_poles():
    with pytest.raises(ValidationError):
        scherk(2.0)
    with pytest.raises(DomainError):
        mg_derivatives(scherk(1.0), np.array([[math.pi / 2, 0.0]]))


def test_conjugates_of_the_horizontal_plane():
    mg = plane()
    grid = mg_grid(mg, 0.125)
    conj = conjugate_functions(mg, grid)
    x = grid.points()
    np.testing.assert_allclose(conj.x1s.values, x[..., 1] + 1.0, atol=1e-12)
    np.testing.assert_allclose(conj.x2s.values, x[..., 0] + 1.0, atol=1e-12)
    np.testing.assert_allclose(conj.fs.values, 0.0, atol=1e-12)
    assert conj.path_err <= 1e-12


def test_conjugate_of_a_tilted_plane_has_constant_gradient():
    a = 2.0
    mg = plane(a, 0.0)
    grid = mg_grid(mg, 0.125)
    fs = conjugate_functions(mg, grid).fs
    x2 = grid.points()[..., 1]
    np.testing.assert_allclose(fs.values, a / math.sqrt(1 + a * a) * (x2 + 1.0), atol=1e-12)


def test_conjugates_need_a_full_box():
    mg = plane()
    grid = mg_grid(mg, 0.25)
    mask = np.ones(grid.shape, dtype=bool)
    mask[4, 4] = False
    with pytest.raises(UnsupportedError):
        conjugate_functions(mg, grid.with_values(grid.values, mask=mask))


def test_heinz_potential_of_a_plane():
    mg = plane(1.0, 0.0)
    heinz = heinz_potential(mg, mg_grid(mg, 0.125))
    assert heinz.det_residual <= 1e-10
    assert heinz.sym_check <= 1e-10


def test_heinz_potential_rejects_non_gradients():
    mg = scherk()
    with pytest.raises(IntegrabilityError):
        heinz_potential(mg, mg_grid(mg, 1 / 16), tol=0.0)


def test_maximal_residual_of_a_tilted_plane():
    mg = plane(2.0, 0.0)
    result = maximal_residual(mg, mg_grid(mg, 0.125))
    assert result.residual <= 1e-9
    assert result.lorentz_max == pytest.approx(2 / math.sqrt(5))
    assert result.identity_err <= 1e-12


def test_jorgens_chain_of_the_horizontal_plane():
    mg = plane()
    result = jorgens_chain(mg, mg_grid(mg, 0.125))
    assert result.laplacian_err <= 1e-8
    assert result.valid_nodes > 0


def test_minimal_surface_identities_on_a_plane():
    mg = plane(0.5, -0.25)
    defect = minimal_surface_jacobi_defect(mg, mg_grid(mg, 1 / 32))
    assert defect.jacobi_defect <= 1e-8
    assert defect.jacobi_field_defect <= 1e-8


def test_scherk_maximal_surface():
    mg = scherk()
    coarse = maximal_residual(mg, mg_grid(mg, 1 / 64))
    fine = maximal_residual(mg, mg_grid(mg, 1 / 128))
    assert fine.lorentz_max < 1.0
    assert fine.identity_err <= 1e-8
    assert fine.residual <= coarse.residual / 3.0


def test_scherk_jorgens_chain():
    mg = scherk()
    result = jorgens_chain(mg, mg_grid(mg, 1 / 32))
    assert result.valid_nodes > 100
    assert result.laplacian_err <= 5e-2


@pytest.mark.slow
def test_scherk_conjugation_chain_converges():
    mg = scherk()
    residuals = []
    for h in (1 / 64, 1 / 128, 1 / 256):
        heinz = heinz_potential(mg, mg_grid(mg, h))
        residuals.append(heinz.det_residual)
    assert residuals[-1] <= 1e-4
    assert math.log2(residuals[1] / residuals[2]) >= 1.8
    assert conjugate_functions(mg, mg_grid(mg, 1 / 256)).path_err <= 1e-6


@pytest.mark.slow
def test_scherk_jacobi_identities():
    mg = scherk()
    defect = minimal_surface_jacobi_defect(mg, mg_grid(mg, 1 / 256))
    assert defect.jacobi_defect <= 1e-6
    assert defect.jacobi_field_defect <= 1e-6
