"""
Orthonormal function systems on the grid.

A :class:`BasisSet` holds ``M`` functions that are orthonormal with respect to
the grid inner product. Deterministic systems (Fourier, cubic B-spline and the
endpoint-vanishing polynomial family whose first member is
``sqrt(30) t (1 - t)``) are built analytically and then Gram-Schmidt corrected
on the grid. Empirical systems come from :func:`fpca`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.interpolate import BSpline

from fgarch.errors import DimensionError, RankError
from fgarch.function_space import Curve, Grid, Kernel2D

__all__ = [
    "BasisSet",
    "explained_variance",
    "fpca",
    "make_basis",
    "project",
    "project_kernel",
    "reconstruct_curve",
    "reconstruct_kernel",
    "select_m",
]

BasisKind = Literal["fourier", "bspline", "poly", "fpca"]

# relative eigenvalue floor below which fPCA directions count as rank-deficient
_RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class BasisSet:
    """
    Discretely orthonormal functions ``phi_1..phi_M``.

    Parameters
    ----------
    grid : Grid
        Grid the functions are sampled on.
    kind : str
        One of ``fourier``, ``bspline``, ``poly`` or ``fpca``.
    values : ndarray
        ``(M, T)`` array; row ``m`` holds ``phi_{m+1}`` at the grid points.
    eigenvalues : ndarray, optional
        Full nonincreasing spectrum of the empirical covariance operator
        (``fpca`` only).
    """

    grid: Grid
    kind: str
    values: np.ndarray
    eigenvalues: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != self.grid.T:
            raise DimensionError(f"basis values have shape {values.shape}, expected (M, {self.grid.T})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def functions(self) -> list[Curve]:
        return [Curve(self.grid, row) for row in self.values]

    def gram(self) -> np.ndarray:
        return self.values @ self.values.T / self.grid.T

    def flipped(self, signs: Sequence[float]) -> BasisSet:
        """Copy with ``phi_m`` multiplied by ``signs[m]``."""
        s = np.asarray(signs, dtype=float)[:, None]
        return BasisSet(self.grid, self.kind, self.values * s, self.eigenvalues)

    def describe(self) -> dict:
        out = {"kind": self.kind, "M": self.M, "grid_T": self.grid.T}
        if self.eigenvalues is not None:
            out["explained_variance"] = explained_variance(self)[: self.M].tolist()
        return out


def _orthonormalize(raw: np.ndarray) -> np.ndarray:
    """Gram-Schmidt (via QR) in the grid inner product; keeps each direction's sign."""
    M, T = raw.shape
    q, r = np.linalg.qr(raw.T / np.sqrt(T))
    d = np.diag(r)
    if np.any(np.abs(d) <= 1e-12 * np.max(np.abs(d))):
        raise RankError("analytic basis columns are linearly dependent on this grid")
    q = q * np.sign(d)
    return (q * np.sqrt(T)).T


def _fourier(M: int, t: np.ndarray) -> np.ndarray:
    rows = [np.ones_like(t)]
    k = 1
    while len(rows) < M:
        rows.append(np.sqrt(2.0) * np.cos(2 * np.pi * k * t))
        if len(rows) < M:
            rows.append(np.sqrt(2.0) * np.sin(2 * np.pi * k * t))
        k += 1
    return np.array(rows)


def _bspline(M: int, t: np.ndarray) -> np.ndarray:
    degree = min(3, M - 1)
    n_interior = M - degree - 1
    inner = np.linspace(0.0, 1.0, n_interior + 2)
    knots = np.concatenate([np.zeros(degree), inner, np.ones(degree)])
    # right-closed evaluation at t = 1 is handled by extrapolate=True
    dm = BSpline.design_matrix(t, knots, degree, extrapolate=True)
    return dm.toarray().T


def _poly(M: int, t: np.ndarray) -> np.ndarray:
    bump = t * (1.0 - t)
    return np.array([np.sqrt(30.0) * bump * (2 * t - 1) ** k for k in range(M)])


def make_basis(kind: BasisKind, M: int, grid: Grid) -> BasisSet:
    """
    Build a deterministic orthonormal basis.

    Parameters
    ----------
    kind : {'fourier', 'bspline', 'poly'}
        ``fourier``: ``1, sqrt2 cos(2 pi k t), sqrt2 sin(2 pi k t), ...``.
        ``bspline``: cubic B-splines on uniform knots (lower degree if M < 4).
        ``poly``: ``t (1 - t) (2t - 1)^k``; the first function is
        ``sqrt(30) t (1 - t)``.
    M : int
        Number of functions, ``1 <= M <= T``.
    grid : Grid

    Returns
    -------
    BasisSet
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if M > grid.T:
        raise RankError(f"M={M} exceeds the grid size T={grid.T}", attainable=grid.T)
    builders = {"fourier": _fourier, "bspline": _bspline, "poly": _poly}
    if kind not in builders:
        raise ValueError(f"unknown basis kind {kind!r}; use fpca() for empirical bases")
    raw = builders[kind](M, grid.points)
    return BasisSet(grid, kind, _orthonormalize(raw))


def _stack(sample) -> np.ndarray:
    if isinstance(sample, np.ndarray):
        return np.atleast_2d(np.asarray(sample, dtype=float))
    curves = list(sample)
    if not curves:
        raise ValueError("sample is empty")
    grid = curves[0].grid
    for c in curves:
        if c.grid != grid:
            raise DimensionError("all curves in a sample must share a grid")
    return np.array([c.values for c in curves])


def fpca(sample, M: int, grid: Grid | None = None) -> BasisSet:
    """
    Empirical functional principal components.

    The covariance kernel ``D(t_j, t_k) = (1/n) sum_i (x_i - xbar)(t_j) (x_i - xbar)(t_k)``
    is eigendecomposed as the integral operator ``(1/T) D``. Eigenfunctions have
    unit grid norm and are signed so that their largest-magnitude value is
    positive.

    Parameters
    ----------
    sample : sequence of Curve or ndarray
        ``n >= 2`` curves (or an ``(n, T)`` array together with ``grid``).
    M : int
        Number of leading components to keep.
    grid : Grid, optional
        Required only when ``sample`` is an array.

    Returns
    -------
    BasisSet
        With ``kind='fpca'`` and the full spectrum in ``eigenvalues``.
    """
    X = _stack(sample)
    if grid is None:
        if isinstance(sample, np.ndarray):
            grid = Grid(X.shape[1])
        else:
            grid = sample[0].grid
    n, T = X.shape
    if T != grid.T:
        raise DimensionError(f"sample has {T} points per curve, grid has {grid.T}")
    if n < 2:
        raise ValueError("fpca needs at least two curves")
    if M < 1:
        raise ValueError("M must be at least 1")

    Xc = X - X.mean(axis=0)
    D = Xc.T @ Xc / n
    lam, vec = np.linalg.eigh(D / T)
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]

    # floor relative to the data scale too, so roundoff from centering
    # identical curves does not count as rank
    floor = _RANK_TOL * max(lam[0], float(np.mean(X * X)))
    rank = int(np.sum(lam > floor)) if floor > 0 else 0
    if M > min(n, T) or M > rank:
        raise RankError(
            f"M={M} exceeds the numerical rank of the sample covariance; attainable M <= {rank}",
            attainable=rank,
        )

    phis = vec[:, :M].T * np.sqrt(T)
    idx = np.argmax(np.abs(phis), axis=1)
    signs = np.sign(phis[np.arange(M), idx])
    phis *= signs[:, None]
    return BasisSet(grid, "fpca", phis, eigenvalues=lam)


def explained_variance(basis: BasisSet) -> np.ndarray:
    """Share of total variance per fPCA component (full spectrum)."""
    if basis.eigenvalues is None:
        raise ValueError("explained variance is only defined for fpca bases")
    lam = np.clip(basis.eigenvalues, 0.0, None)
    total = lam.sum()
    return lam / total if total > 0 else np.zeros_like(lam)


def select_m(eigenvalues: np.ndarray, threshold: float = 0.70, cap: int = 5) -> int:
    """Smallest M whose cumulative explained variance reaches ``threshold``, at most ``cap``."""
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    if lam.sum() <= 0:
        raise RankError("sample covariance is zero; no component can be selected", attainable=0)
    cum = np.cumsum(lam) / lam.sum()
    m = int(np.searchsorted(cum, threshold - 1e-12) + 1)
    return max(1, min(m, cap))


def project(f, basis: BasisSet) -> np.ndarray:
    """Coefficients ``<f, phi_m>``; accepts a Curve or an ``(n, T)`` array of values."""
    if isinstance(f, Curve):
        if f.grid != basis.grid:
            raise DimensionError("curve and basis live on different grids")
        values = f.values
    else:
        values = np.asarray(f, dtype=float)
        if values.shape[-1] != basis.grid.T:
            raise DimensionError("values and basis live on different grids")
    return values @ basis.values.T / basis.grid.T


def project_kernel(K: Kernel2D, basis: BasisSet) -> np.ndarray:
    """``C[m, m'] = <<K, phi_m (x) phi_m'>>``."""
    if K.grid != basis.grid:
        raise DimensionError("kernel and basis live on different grids")
    P = basis.values
    return P @ K.values @ P.T / basis.grid.T**2


def reconstruct_curve(c, basis: BasisSet) -> Curve:
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.shape[0] != basis.M:
        raise DimensionError(f"expected {basis.M} coefficients, got {c.shape[0]}")
    return Curve(basis.grid, c @ basis.values)


def reconstruct_kernel(C, basis: BasisSet) -> Kernel2D:
    """``K(t, s) = sum_{m, m'} C[m, m'] phi_m(t) phi_m'(s)``."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape != (basis.M, basis.M):
        raise DimensionError(f"coefficient matrix has shape {C.shape}, expected ({basis.M}, {basis.M})")
    P = basis.values
    return Kernel2D(basis.grid, P.T @ C @ P)
