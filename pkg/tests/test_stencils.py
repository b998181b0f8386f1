import numpy as np
import pytest

from hessian.stencils import derivative, gradient, hessian_full, interior, laplacian, second_differences
from models import GridField

A = np.array([[2.0, 0.5, -1.0], [0.5, 1.0, 0.25], [-1.0, 0.25, -0.75]])


@pytest.fixture
def quadratic_grid():
    return GridField.from_function(
        lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, A, x) + x[..., 0], [-1, -1, -1], [1, 1, 1], 0.25
    )


def test_second_differences_are_exact_on_quadratics(quadratic_grid):
    H = second_differences(quadratic_grid.values, quadratic_grid.spacing)
    assert H.shape == (7, 7, 7, 3, 3)
    np.testing.assert_allclose(H, np.broadcast_to(A, H.shape), atol=1e-12)


def test_laplacian_is_trace_of_second_differences(quadratic_grid):
    lap = laplacian(quadratic_grid.values, quadratic_grid.spacing)
    np.testing.assert_allclose(lap, np.trace(A), atol=1e-12)


def test_gradient_and_full_hessian_on_quadratics(quadratic_grid):
    x = quadratic_grid.points()
    Du = gradient(quadratic_grid.values, quadratic_grid.spacing)
    np.testing.assert_allclose(Du, x @ A + np.array([1.0, 0.0, 0.0]), atol=1e-12)
    H = hessian_full(quadratic_grid.values, quadratic_grid.spacing)
    np.testing.assert_allclose(H[interior(3)], np.broadcast_to(A, H[interior(3)].shape), atol=1e-11)


def test_derivative_marks_incomplete_stencils():
    values = np.sin(np.linspace(0, 1, 11))
    d = derivative(values, 0.1, axis=0, accuracy=4)
    assert np.isnan(d[:2]).all() and np.isnan(d[-2:]).all()
    assert np.isfinite(d[2:-2]).all()


@pytest.mark.parametrize("order, accuracy", [(1, 2), (1, 4), (2, 2), (2, 4)])
def test_derivative_observed_order(order, accuracy):
    errors = []
    for h in (0.1, 0.05):
        x = np.arange(0.0, 1.0 + h / 2, h)
        d = derivative(np.exp(x), h, axis=0, order=order, accuracy=accuracy)
        errors.append(np.nanmax(np.abs(d - np.exp(x))))
    observed = np.log2(errors[0] / errors[1])
    assert observed == pytest.approx(accuracy, abs=0.3)
