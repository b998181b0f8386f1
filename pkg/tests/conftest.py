import numpy as np
import pytest

from hessian.zoo import quadratic, warren, zoo_eval
from models import GridField


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def warren3():
    return warren(3)


@pytest.fixture
def paraboloid3():
    """|x|^2 / 2 in three dimensions."""
    return quadratic(np.eye(3))


@pytest.fixture
def grid_of():
    """Node values of a closed-form solution on the cube [-half_width, half_width]^n."""

    def build(s, half_width, h):
        return GridField.from_function(
            lambda x: zoo_eval(s, x, order=0).value, [-half_width] * s.n, [half_width] * s.n, h
        )

    return build
