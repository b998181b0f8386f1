import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from pydantic import ValidationError

from errors import DomainError, SymmetryError
from models import GridField, Tensor3, tensor_basis
from schemas import (
    ClosedFormSolution,
    MinimalGraph2D,
    MinimalGraphKind,
    SolutionKind,
    SolveConfig,
    Spectrum,
    TestFunction,
    VerticalPoint,
)


def test_grid_needs_positive_spacing():
    with pytest.raises(ValidationError):
        GridField(origin=(0.0,), spacing=(0.0,), values=np.zeros(4))


def test_grid_needs_three_nodes_per_axis():
    with pytest.raises(ValidationError):
        GridField(origin=(0.0, 0.0), spacing=(1.0, 1.0), values=np.zeros((3, 2)))


def test_grid_values_finite_on_defined_nodes():
    values = np.zeros((3, 3))
    values[1, 1] = np.nan
    with pytest.raises(ValidationError):
        GridField(origin=(0.0, 0.0), spacing=(1.0, 1.0), values=values)
    mask = np.ones((3, 3), dtype=bool)
    mask[1, 1] = False
    grid = GridField(origin=(0.0, 0.0), spacing=(1.0, 1.0), values=values, mask=mask)
    assert grid.defined().sum() == 8


def test_grid_box_geometry():
    grid = GridField.box([-1, -1, -1], [1, 1, 1], 0.25)
    assert grid.shape == (9, 9, 9)
    np.testing.assert_allclose(grid.upper, [1, 1, 1])
    assert grid.covers_ball(1.0)
    assert not grid.covers_ball(1.5)
    np.testing.assert_allclose(grid.node_point((4, 4, 4)), 0.0)


def test_spectrum_validation():
    with pytest.raises(ValidationError):
        Spectrum(values=[1.0])
    with pytest.raises(ValidationError):
        Spectrum(values=[1.0, float("nan")])
    assert Spectrum.of(np.array([[2.0, 1.0]])).n == 2


def test_vertical_point_bounds():
    VerticalPoint(mu=Spectrum(values=[0.5, 1.0]), K=1.0, delta=1.0)
    with pytest.raises(ValidationError):
        VerticalPoint(mu=Spectrum(values=[0.5, 1.5]), K=1.0, delta=1.0)
    with pytest.raises(ValidationError):
        VerticalPoint(mu=Spectrum(values=[0.0, 0.5]), K=1.0, delta=1.0)


def test_closed_form_solution_checks():
    with pytest.raises(ValidationError):
        ClosedFormSolution(kind=SolutionKind.QUADRATIC, n=2, A=[[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValidationError):
        ClosedFormSolution(kind=SolutionKind.LI_SINGULAR, n=8, a="7/5")
    with pytest.raises(ValidationError):
        ClosedFormSolution(kind=SolutionKind.LI_SINGULAR, n=8, a="x", b="3/5", c="17/5", gamma1="1", gamma2="1")
    assert ClosedFormSolution(kind=SolutionKind.WARREN, n=3).domain_note == "entire"


def test_test_function_scales():
    with pytest.raises(ValidationError):
        TestFunction(center=[0.0, 0.0], radius=0.5, scales=[1.0])
    with pytest.raises(ValidationError):
        TestFunction(center=[0.0], radius=0.5, scales=[-1.0])
    np.testing.assert_allclose(TestFunction(center=[0.0, 0.0], radius=0.5, scales=[1.0, 2.0]).half_widths(), [0.5, 1.0])


def test_minimal_graph_patch():
    with pytest.raises(ValidationError):
        MinimalGraph2D(kind=MinimalGraphKind.SCHERK, half_width=1.6)
    assert MinimalGraph2D(kind=MinimalGraphKind.PLANE, half_width=5.0).half_width == 5.0


def test_solve_config_bounds():
    with pytest.raises(ValidationError):
        SolveConfig(backtrack=1.0)
    with pytest.raises(ValidationError):
        SolveConfig(max_newton_iters=0)


def test_tensor_basis_is_orthonormal():
    for n in (2, 3, 4, 5):
        basis = tensor_basis(n)
        assert basis.dim == n * (n + 1) * (n + 2) // 6
        np.testing.assert_allclose(basis.embed.T @ basis.embed, np.eye(basis.dim), atol=1e-14)


def test_tensor_from_full_needs_symmetry():
    full = np.zeros((3, 3, 3))
    full[0, 0, 1] = 1.0
    with pytest.raises(SymmetryError):
        Tensor3.from_full(full)
    with pytest.raises(DomainError):
        Tensor3.from_full(np.zeros((3, 3)))


def test_tensor_from_entries_fills_permutations():
    c = Tensor3.from_entries(3, {(2, 0, 0): 2.0})
    full = c.full()
    assert full[0, 0, 2] == full[0, 2, 0] == full[2, 0, 0] == pytest.approx(2.0)
    assert c.norm() == pytest.approx(np.sqrt(3 * 4.0))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 10, elements=st.floats(-10, 10)))
def test_tensor_coordinates_preserve_the_frobenius_norm(coords):
    c = Tensor3.from_coords(3, coords)
    assert c.norm() == pytest.approx(np.linalg.norm(c.full()), abs=1e-9)
    np.testing.assert_allclose(Tensor3.from_full(c.full()).coords(), coords, atol=1e-9)


def test_rotation_by_identity_is_trivial():
    c = Tensor3.from_entries(3, {(0, 1, 2): 1.0, (2, 2, 2): -0.5})
    np.testing.assert_allclose(c.rotated(np.eye(3)).entries, c.entries)
