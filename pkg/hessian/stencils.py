"""Finite-difference stencils on uniform grids."""
from itertools import combinations
from typing import Sequence, Tuple

import numpy as np
from scipy.ndimage import correlate1d

FIRST = {
    2: np.array([-0.5, 0.0, 0.5]),
    4: np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0,
}
SECOND = {
    2: np.array([1.0, -2.0, 1.0]),
    4: np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0,
}


def interior(ndim: int, margin: int = 1) -> Tuple[slice, ...]:
    return (slice(margin, -margin),) * ndim


def shifted(values: np.ndarray, offsets: Sequence[int]) -> np.ndarray:
    """Interior view of ``values`` shifted by one node along each offset."""
    index = tuple(slice(1 + o, values.shape[a] - 1 + o) for a, o in enumerate(offsets))
    return values[index]


def second_differences(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Central-difference Hessian at interior nodes, shape ``interior + (n, n)``.

    Pure second derivatives use the 3-point stencil, mixed ones the 4-point
    cross stencil.
    """
    n = values.ndim
    centre = shifted(values, [0] * n)
    H = np.empty(centre.shape + (n, n))
    for i in range(n):
        up = [0] * n
        up[i] = 1
        down = [0] * n
        down[i] = -1
        H[..., i, i] = (shifted(values, up) - 2 * centre + shifted(values, down)) / spacing[i] ** 2
    for i, j in combinations(range(n), 2):
        total = 0.0
        for si, sj, sign in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
            off = [0] * n
            off[i] = si
            off[j] = sj
            total = total + sign * shifted(values, off)
        H[..., i, j] = H[..., j, i] = total / (4 * spacing[i] * spacing[j])
    return H


def laplacian(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    n = values.ndim
    centre = shifted(values, [0] * n)
    out = np.zeros(centre.shape)
    for i in range(n):
        up = [0] * n
        up[i] = 1
        down = [0] * n
        down[i] = -1
        out += (shifted(values, up) - 2 * centre + shifted(values, down)) / spacing[i] ** 2
    return out


def gradient(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Second-order gradient on every node, stacked on the last axis."""
    parts = np.gradient(values, *spacing, edge_order=2)
    if values.ndim == 1:
        parts = [parts]
    return np.stack(parts, axis=-1)


def hessian_full(values: np.ndarray, spacing: Sequence[float]) -> np.ndarray:
    """Hessian on every node by nested second-order gradients."""
    n = values.ndim
    first = gradient(values, spacing)
    H = np.empty(values.shape + (n, n))
    for i in range(n):
        second = gradient(first[..., i], spacing)
        H[..., i, :] = second
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def derivative(
    values: np.ndarray,
    h: float,
    axis: int,
    order: int = 1,
    accuracy: int = 2,
) -> np.ndarray:
    """Central derivative along one axis; nodes without a full stencil are nan."""
    weights = (FIRST if order == 1 else SECOND)[accuracy]
    out = correlate1d(values, weights, axis=axis, mode="nearest") / h**order
    half = len(weights) // 2
    edge = [slice(None)] * values.ndim
    edge[axis] = slice(0, half)
    out[tuple(edge)] = np.nan
    edge[axis] = slice(values.shape[axis] - half, None)
    out[tuple(edge)] = np.nan
    return out
