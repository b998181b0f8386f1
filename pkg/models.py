from functools import cached_property, lru_cache
from itertools import combinations_with_replacement, permutations
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from errors import DomainError, SymmetryError

Triple = Tuple[int, int, int]


class GridField(BaseModel):
    """Scalar field on a uniform axis-aligned grid.

    ``values`` is node-major with axis ``a`` running over ``origin[a] +
    spacing[a] * i``.  ``mask`` marks defined nodes (``None`` means all nodes
    are defined); values are finite wherever the mask is set.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    origin: Tuple[float, ...]
    spacing: Tuple[float, ...]
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    @field_validator("spacing")
    @classmethod
    def spacing_positive(cls, v):
        if any(not np.isfinite(h) or h <= 0 for h in v):
            raise ValueError("grid spacing must be positive")
        return v

    @model_validator(mode="after")
    def check_layout(self):
        values = self.values
        if values.ndim != len(self.origin) or values.ndim != len(self.spacing):
            raise ValueError("origin, spacing and values must agree on dimension")
        if any(s < 3 for s in values.shape):
            raise ValueError(f"need at least 3 nodes per axis, got shape {values.shape}")
        if self.mask is not None:
            if self.mask.shape != values.shape or self.mask.dtype != bool:
                raise ValueError("mask must be a boolean array of the grid shape")
            defined = values[self.mask]
        else:
            defined = values
        if not np.all(np.isfinite(defined)):
            raise ValueError("grid values must be finite on defined nodes")
        return self

    @classmethod
    def box(
        cls,
        lower: Sequence[float],
        upper: Sequence[float],
        h: float,
        fill: float = 0.0,
    ) -> "GridField":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        counts = np.rint((upper - lower) / h).astype(int) + 1
        spacing = (upper - lower) / (counts - 1)
        return cls(
            origin=tuple(lower.tolist()),
            spacing=tuple(spacing.tolist()),
            values=np.full(tuple(counts.tolist()), fill, dtype=float),
        )

    @classmethod
    def from_function(
        cls,
        fn: Callable[[np.ndarray], np.ndarray],
        lower: Sequence[float],
        upper: Sequence[float],
        h: float,
    ) -> "GridField":
        shell = cls.box(lower, upper, h)
        return shell.with_values(np.asarray(fn(shell.points()), dtype=float).reshape(shell.shape))

    def with_values(self, values: np.ndarray, mask: Optional[np.ndarray] = None) -> "GridField":
        return GridField(origin=self.origin, spacing=self.spacing, values=values, mask=mask)

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.spacing) * (np.asarray(self.shape) - 1)

    @cached_property
    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(
            o + h * np.arange(s) for o, h, s in zip(self.origin, self.spacing, self.shape)
        )

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``grid.shape + (n,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def radius(self) -> np.ndarray:
        return np.linalg.norm(self.points(), axis=-1)

    def defined(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return self.mask

    def covers_ball(self, r: float) -> bool:
        return bool(np.all(np.asarray(self.origin) <= -r + 1e-12) and np.all(self.upper >= r - 1e-12))

    def node_point(self, index: Sequence[int]) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.spacing) * np.asarray(index)


class TensorBasis:
    """Frobenius-orthonormal coordinates on fully symmetric 3-tensors.

    Coordinate ``t`` corresponds to the sorted triple ``triples[t]``; the
    tensor with coordinate vector ``x`` has entries ``x[t] / sqrt(m_t)`` on
    every permutation of the triple, where ``m_t`` is its multiplicity.
    """

    def __init__(self, n: int):
        self.n = n
        self.triples: Tuple[Triple, ...] = tuple(combinations_with_replacement(range(n), 3))
        self.multiplicity = np.array([len(set(permutations(t))) for t in self.triples], dtype=float)
        embed = np.zeros((n**3, len(self.triples)))
        for col, t in enumerate(self.triples):
            for p in set(permutations(t)):
                embed[np.ravel_multi_index(p, (n, n, n)), col] = 1.0 / np.sqrt(self.multiplicity[col])
        self.embed = embed
        self.embed.setflags(write=False)

    @property
    def dim(self) -> int:
        return len(self.triples)

    def to_full(self, coords: np.ndarray) -> np.ndarray:
        return (self.embed @ coords).reshape(self.n, self.n, self.n)

    def to_coords(self, full: np.ndarray) -> np.ndarray:
        return self.embed.T @ full.reshape(-1)

    def pullback(self, functional: np.ndarray) -> np.ndarray:
        """Coefficients in the basis of a linear functional given on full tensors."""
        return self.embed.T @ functional.reshape(self.n**3, -1)


@lru_cache(maxsize=None)
def tensor_basis(n: int) -> TensorBasis:
    return TensorBasis(n)


class Tensor3:
    """Fully symmetric rank-3 tensor stored by its independent entries."""

    __slots__ = ("n", "entries")

    def __init__(self, n: int, entries: np.ndarray):
        entries = np.asarray(entries, dtype=float)
        if entries.shape != (tensor_basis(n).dim,):
            raise DomainError(f"Tensor3 of side {n} needs {tensor_basis(n).dim} entries")
        self.n = n
        self.entries = entries

    @classmethod
    def zeros(cls, n: int) -> "Tensor3":
        return cls(n, np.zeros(tensor_basis(n).dim))

    @classmethod
    def from_entries(cls, n: int, values: Dict[Iterable[int], float]) -> "Tensor3":
        """Build from a sparse map; each key sets all of its permutations."""
        basis = tensor_basis(n)
        lookup = {t: i for i, t in enumerate(basis.triples)}
        entries = np.zeros(basis.dim)
        for key, value in values.items():
            entries[lookup[tuple(sorted(key))]] = value
        return cls(n, entries)

    @classmethod
    def from_full(cls, full: np.ndarray, tol: float = 1e-10) -> "Tensor3":
        full = np.asarray(full, dtype=float)
        n = full.shape[0]
        if full.shape != (n, n, n):
            raise DomainError("expected an n x n x n array")
        scale = max(1.0, float(np.abs(full).max(initial=0.0)))
        for axes in ((1, 0, 2), (0, 2, 1), (2, 1, 0)):
            if np.abs(full - full.transpose(axes)).max(initial=0.0) > tol * scale:
                raise SymmetryError("third-derivative array is not fully symmetric")
        basis = tensor_basis(n)
        return cls(n, np.array([full[t] for t in basis.triples]))

    @classmethod
    def from_coords(cls, n: int, coords: np.ndarray) -> "Tensor3":
        basis = tensor_basis(n)
        return cls(n, np.asarray(coords, dtype=float) / np.sqrt(basis.multiplicity))

    def coords(self) -> np.ndarray:
        return self.entries * np.sqrt(tensor_basis(self.n).multiplicity)

    def full(self) -> np.ndarray:
        return tensor_basis(self.n).to_full(self.coords())

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords()))

    def scaled(self, t: float) -> "Tensor3":
        return Tensor3(self.n, t * self.entries)

    def rotated(self, V: np.ndarray) -> "Tensor3":
        """Components in the frame whose axes are the columns of ``V``."""
        full = np.einsum("ia,jb,kc,ijk->abc", V, V, V, self.full())
        return Tensor3.from_full(full)

    def __repr__(self) -> str:
        return f"Tensor3(n={self.n}, norm={self.norm():.4g})"
