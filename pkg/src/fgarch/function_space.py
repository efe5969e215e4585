"""
Discretized L2[0, 1] primitives.

Functions on [0, 1] are stored by their values on the right-endpoint grid
``t_j = j / T`` (``j = 1..T``); every integral is the Riemann sum with the
uniform weight ``1 / T``. Because the same rule is used everywhere, projection
onto a discretely orthonormal basis and reconstruction from coefficients are
exact inverses on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from fgarch.errors import DimensionError

__all__ = [
    "Curve",
    "Grid",
    "Kernel2D",
    "apply_kernel",
    "hs_norm",
    "inner_product",
    "l2_norm",
    "row_integrate",
    "sup_norm",
]


@dataclass(frozen=True)
class Grid:
    """Uniform right-endpoint grid with ``T`` points ``j/T``, ``j = 1..T``."""

    T: int

    def __post_init__(self) -> None:
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"grid size must be a positive integer, got {self.T!r}")

    @property
    def points(self) -> np.ndarray:
        return np.arange(1, self.T + 1, dtype=float) / self.T

    @property
    def weight(self) -> float:
        return 1.0 / self.T


def _as_values(values, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise DimensionError(f"{what} values have shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Curve:
    """A function on [0, 1] sampled on ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_values(self.values, (self.grid.T,), "curve"))

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray]) -> Curve:
        return cls(grid, np.broadcast_to(func(grid.points), (grid.T,)))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> Curve:
        return cls(grid, np.full(grid.T, float(value)))

    def __add__(self, other: Curve) -> Curve:
        _check_grid(self.grid, other.grid)
        return Curve(self.grid, self.values + other.values)

    def __sub__(self, other: Curve) -> Curve:
        _check_grid(self.grid, other.grid)
        return Curve(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> Curve:
        return Curve(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Kernel2D:
    """A kernel ``K(t, s)`` on [0, 1]^2; ``values[j, k] = K(t_j, t_k)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        T = self.grid.T
        object.__setattr__(self, "values", _as_values(self.values, (T, T), "kernel"))

    @classmethod
    def from_function(
        cls, grid: Grid, func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> Kernel2D:
        t = grid.points
        return cls(grid, np.broadcast_to(func(t[:, None], t[None, :]), (grid.T, grid.T)))

    @classmethod
    def zeros(cls, grid: Grid) -> Kernel2D:
        return cls(grid, np.zeros((grid.T, grid.T)))

    def __add__(self, other: Kernel2D) -> Kernel2D:
        _check_grid(self.grid, other.grid)
        return Kernel2D(self.grid, self.values + other.values)

    def __mul__(self, scalar: float) -> Kernel2D:
        return Kernel2D(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


def _check_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise DimensionError(f"grid mismatch: T={a.T} vs T={b.T}")


def inner_product(f: Curve, g: Curve) -> float:
    """Riemann-sum inner product ``(1/T) sum_j f(t_j) g(t_j)``."""
    _check_grid(f.grid, g.grid)
    return float(np.dot(f.values, g.values)) / f.grid.T


def l2_norm(f: Curve) -> float:
    return float(np.sqrt(inner_product(f, f)))


def sup_norm(f: Curve) -> float:
    return float(np.max(np.abs(f.values)))


def hs_norm(K: Kernel2D) -> float:
    """Hilbert-Schmidt norm, the discrete version of the double integral of K^2."""
    return float(np.sqrt(np.sum(K.values**2))) / K.grid.T


def apply_kernel(K: Kernel2D, f: Curve) -> Curve:
    """Integral operator ``(Kf)(t) = int K(t, s) f(s) ds`` on the grid."""
    _check_grid(K.grid, f.grid)
    return Curve(K.grid, K.values @ f.values / K.grid.T)


def row_integrate(K: Kernel2D) -> Curve:
    """``t -> int K(t, s) ds``; identical to applying K to the constant one."""
    return apply_kernel(K, Curve.constant(K.grid, 1.0))
