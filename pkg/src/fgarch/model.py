"""
The functional GARCH(1, 1) process.

Daily curves follow

    y_i(t)        = sigma_i(t) * eps_i(t)
    sigma_i^2(t)  = delta(t) + (alpha y_{i-1}^2)(t) + (beta sigma_{i-1}^2)(t)

with nonnegative intercept curve ``delta`` and integral operators ``alpha``,
``beta`` given by nonnegative kernels. This module simulates the process,
evaluates Monte Carlo versions of the stationarity conditions built on the
random kernel ``gamma(t, s) = alpha(t, s) eps^2(s) + beta(t, s)``, and provides
the backward series representation used as a simulation oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numpy as np
from scipy.signal import lfilter

from fgarch.errors import ConsistencyError, DimensionError
from fgarch.function_space import Curve, Grid, Kernel2D, apply_kernel

__all__ = [
    "CouplingRow",
    "FGarchSpec",
    "InnovationGen",
    "MonteCarloEstimate",
    "SimResult",
    "coupling_decay",
    "decay_fit",
    "gamma_kernel",
    "lyapunov_l2",
    "lyapunov_sup",
    "moment_norm",
    "ou_innovation",
    "series_solution",
    "simulate",
]

log = logging.getLogger(__name__)

# Monte Carlo draws are generated in fixed-size chunks, each with its own
# stream derived from (seed, tag, chunk index); results do not depend on how
# chunks are scheduled.
CHUNK = 10_000

_TAG_INNOVATION = 1
_TAG_LYAPUNOV = 2
_TAG_COUPLING = 3


def spawn_rng(seed: int | None, *keys: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *keys)``."""
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


@dataclass(frozen=True, eq=False)
class FGarchSpec:
    """Intercept curve and the two kernels of the volatility equation."""

    delta: Curve
    alpha: Kernel2D
    beta: Kernel2D

    def __post_init__(self) -> None:
        if not (self.delta.grid == self.alpha.grid == self.beta.grid):
            raise DimensionError("delta, alpha and beta must share a grid")
        for name, arr in (("delta", self.delta.values), ("alpha", self.alpha.values), ("beta", self.beta.values)):
            scale = max(1.0, float(np.max(np.abs(arr))))
            if np.min(arr) < -1e-12 * scale:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def grid(self) -> Grid:
        return self.delta.grid


@dataclass(frozen=True)
class InnovationGen:
    """
    Innovation curve generator.

    ``ou_bridge`` draws the Gaussian curve
    ``eps(t) = sqrt(log 2) 2^(-c t) B(2^(2 c t) / log 2)`` with ``B`` a standard
    Brownian motion and ``c = rate``; ``iid_gaussian_pointwise`` draws
    independent standard normals at every grid point (a degenerate test case).
    """

    kind: Literal["ou_bridge", "iid_gaussian_pointwise"] = "ou_bridge"
    rate: float = 200.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("ou_bridge", "iid_gaussian_pointwise"):
            raise ValueError(f"unknown innovation kind {self.kind!r}")
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def draw(self, grid: Grid, size: int, rng: np.random.Generator) -> np.ndarray:
        """``(size, T)`` array of independent innovation curves."""
        z = rng.standard_normal((size, grid.T))
        if self.kind == "iid_gaussian_pointwise":
            return z
        return _ou_filter(z, self.rate, grid.T)


def _ou_filter(z: np.ndarray, rate: float, T: int) -> np.ndarray:
    # On the grid, eps(t_j) = B(x_j) / sqrt(x_j) with x_j = 2^(2 c t_j) / log 2,
    # so Corr(eps(t_j), eps(t_k)) = 2^(-c |t_k - t_j|): a stationary AR(1) in j.
    # Evaluating B at x_j directly is hopeless for c = 200 (x_j ~ 1e120).
    rho = 2.0 ** (-rate / T)
    s = math.sqrt(1.0 - rho * rho)
    if s == 0.0:
        return np.repeat(z[:, :1], T, axis=1)
    z = z.copy()
    z[:, 0] /= s
    return lfilter([s], [1.0, -rho], z, axis=1)


def ou_innovation(gen: InnovationGen, grid: Grid, size: int | None = None,
                  rng: np.random.Generator | None = None):
    """
    Draw innovation curve(s).

    Returns a single :class:`Curve` when ``size`` is None, otherwise a
    ``(size, T)`` array. The stream comes from ``gen.seed`` unless ``rng`` is
    given.
    """
    if rng is None:
        rng = spawn_rng(gen.seed, _TAG_INNOVATION)
    if size is None:
        return Curve(grid, gen.draw(grid, 1, rng)[0])
    return gen.draw(grid, size, rng)


def gamma_kernel(spec: FGarchSpec, eps: Curve) -> Kernel2D:
    """Random kernel ``alpha(t, s) eps(s)^2 + beta(t, s)``."""
    if eps.grid != spec.grid:
        raise DimensionError("innovation and model live on different grids")
    return Kernel2D(spec.grid, spec.alpha.values * eps.values[None, :] ** 2 + spec.beta.values)


@dataclass(frozen=True, eq=False)
class SimResult:
    """Simulated curves; rows of each ``(n, T)`` array are days."""

    y: np.ndarray
    sigma2: np.ndarray
    eps: np.ndarray
    spec: FGarchSpec
    burnin: int

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def curves(self, which: str = "y") -> list[Curve]:
        return [Curve(self.spec.grid, row) for row in getattr(self, which)]


def simulate(
    spec: FGarchSpec,
    gen: InnovationGen,
    n: int,
    burnin: int = 1000,
    innovations: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> SimResult:
    """
    Simulate ``n`` days after discarding ``burnin`` days.

    The recursion starts from ``sigma_1^2 = delta``. Innovations are drawn
    from ``gen`` (stream ``gen.seed`` unless ``rng`` is given) or taken from
    ``innovations``, an ``(burnin + n, T)`` array.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if burnin < 0:
        raise ValueError("burnin must be nonnegative")
    grid = spec.grid
    total = burnin + n
    if innovations is None:
        if rng is None:
            rng = spawn_rng(gen.seed, _TAG_INNOVATION)
        eps = gen.draw(grid, total, rng)
    else:
        eps = np.asarray(innovations, dtype=float)
        if eps.shape != (total, grid.T):
            raise DimensionError(f"innovations have shape {eps.shape}, expected {(total, grid.T)}")

    delta = spec.delta.values
    alpha_t = spec.alpha.values.T / grid.T
    beta_t = spec.beta.values.T / grid.T
    eps2 = eps * eps
    sigma2 = np.empty_like(eps)
    sigma2[0] = delta
    for i in range(1, total):
        prev = sigma2[i - 1]
        sigma2[i] = delta + (prev * eps2[i - 1]) @ alpha_t + prev @ beta_t
    if np.any(sigma2 < 0):
        raise ConsistencyError("negative volatility encountered; kernels must be nonnegative")

    sigma2 = sigma2[burnin:]
    eps = eps[burnin:]
    y = np.sqrt(sigma2) * eps
    return SimResult(y=y, sigma2=sigma2, eps=eps, spec=spec, burnin=burnin)


def series_solution(spec: FGarchSpec, eps_history: Sequence[Curve], K: int) -> Curve:
    """
    Truncated backward series ``sum_{k=0}^{K} Gamma_k delta``.

    ``Gamma_k`` composes the random operators of the ``k`` most recent
    innovations; ``eps_history[0]`` is the most recent one. Evaluated by
    nesting ``delta + gamma_1(delta + gamma_2(... + gamma_K delta))``.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    if K > len(eps_history):
        raise ValueError(f"K={K} exceeds the {len(eps_history)} available innovations")
    out = spec.delta
    for k in range(K - 1, -1, -1):
        out = spec.delta + apply_kernel(gamma_kernel(spec, eps_history[k]), out)
    return out


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    reps: int
    n_neg_inf: int = 0

    def __float__(self) -> float:
        return float(self.mean)

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "reps": self.reps, "n_neg_inf": self.n_neg_inf}


def _chunks(reps: int) -> Iterator[tuple[int, int]]:
    for c, start in enumerate(range(0, reps, CHUNK)):
        yield c, min(CHUNK, reps - start)


def _gamma_norms(spec: FGarchSpec, gen: InnovationGen, reps: int, norm_kind: str) -> np.ndarray:
    """Norms of ``reps`` independent gamma kernels (``hs`` or ``sup`` of the row integral)."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if norm_kind not in ("hs", "sup"):
        raise ValueError(f"unknown norm kind {norm_kind!r}")
    grid = spec.grid
    T = grid.T
    a, b = spec.alpha.values, spec.beta.values
    if norm_kind == "hs":
        # sum_{j,k} (a_jk e_k + b_jk)^2 expands into column sums, O(T) per draw
        a2 = (a * a).sum(axis=0)
        ab = (a * b).sum(axis=0)
        b2 = float((b * b).sum())
    else:
        beta_bar = b.sum(axis=1) / T
    out = np.empty(reps)
    pos = 0
    for c, size in _chunks(reps):
        e = gen.draw(grid, size, spawn_rng(gen.seed, _TAG_LYAPUNOV, c)) ** 2
        if norm_kind == "hs":
            sq = (e * e) @ a2 + 2.0 * (e @ ab) + b2
            out[pos:pos + size] = np.sqrt(np.clip(sq, 0.0, None)) / T
        else:
            bar = e @ a.T / T + beta_bar
            out[pos:pos + size] = np.max(np.abs(bar), axis=1)
        pos += size
    return out


def _summarize(values: np.ndarray, n_neg_inf: int = 0) -> MonteCarloEstimate:
    reps = values.size
    if n_neg_inf:
        return MonteCarloEstimate(-math.inf, math.nan, reps, n_neg_inf)
    sd = float(np.std(values, ddof=1)) if reps > 1 else 0.0
    return MonteCarloEstimate(float(np.mean(values)), sd / math.sqrt(reps), reps, 0)


def _log_mean(norms: np.ndarray) -> MonteCarloEstimate:
    zero = norms <= 0.0
    with np.errstate(divide="ignore"):
        logs = np.log(norms)
    return _summarize(logs, int(zero.sum()))


def lyapunov_l2(spec: FGarchSpec, gen: InnovationGen, reps: int) -> MonteCarloEstimate:
    """
    Monte Carlo estimate of ``E log ||gamma||_HS``.

    A negative value is the sufficient condition for a unique strictly
    stationary solution in L2. A draw with zero norm makes the estimate
    ``-inf`` (its count is reported in ``n_neg_inf``).
    """
    return _log_mean(_gamma_norms(spec, gen, reps, "hs"))


def lyapunov_sup(spec: FGarchSpec, gen: InnovationGen, reps: int) -> MonteCarloEstimate:
    """Continuous-function analogue: ``E log sup_t int gamma(t, s) ds``."""
    return _log_mean(_gamma_norms(spec, gen, reps, "sup"))


def moment_norm(
    spec: FGarchSpec,
    gen: InnovationGen,
    nu: float = 1.0,
    reps: int = 10_000,
    norm_kind: Literal["hs", "sup"] = "hs",
) -> MonteCarloEstimate:
    """Monte Carlo estimate of ``E ||gamma||^nu``; below one means stationary with moments."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    return _summarize(_gamma_norms(spec, gen, reps, norm_kind) ** nu)


@dataclass(frozen=True)
class CouplingRow:
    ell: int
    mean: float
    stderr: float


def coupling_decay(
    spec: FGarchSpec,
    gen: InnovationGen,
    ell_values: Sequence[int],
    reps: int,
    depth: int | None = None,
    chunk: int = 100,
) -> list[CouplingRow]:
    """
    Mean L2 distance between ``sigma_i^2`` and its ``ell``-dependent coupling.

    The coupled volatility shares the ``ell`` most recent innovations with the
    original and uses independent copies further back. Both are started from
    ``delta`` ``depth`` days in the past (default ``max(ell) + 100``); the
    truncation contributes a term of the order of the geometric decay itself.
    """
    ells = [int(e) for e in ell_values]
    if any(e < 0 for e in ells):
        raise ValueError("ell values must be nonnegative")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    D = depth if depth is not None else max(ells) + 100
    if D < max(ells):
        raise ValueError("depth must be at least max(ell)")
    grid = spec.grid
    T = grid.T
    delta = spec.delta.values
    alpha_t = spec.alpha.values.T / T
    beta_t = spec.beta.values.T / T

    def step(state, e2):
        return (state * e2) @ alpha_t + state @ beta_t

    dists = {e: np.empty(reps) for e in ells}
    pos = 0
    for c, start in enumerate(range(0, reps, chunk)):
        m = min(chunk, reps - start)
        rng = spawn_rng(gen.seed, _TAG_COUPLING, c)
        # position k = 1..D holds eps_{i-k}; index k-1 in the arrays
        orig = gen.draw(grid, m * D, rng).reshape(m, D, T) ** 2
        copy = gen.draw(grid, m * D, rng).reshape(m, D, T) ** 2

        # before[k] = state at time i-k, i.e. after absorbing positions D..k+1
        orig_before = {}
        copy_before = {}
        s_o = np.broadcast_to(delta, (m, T)).copy()
        s_c = s_o.copy()
        for k in range(D, 0, -1):
            if k in dists:
                orig_before[k] = s_o
                copy_before[k] = s_c
            s_o = delta + step(s_o, orig[:, k - 1])
            s_c = delta + step(s_c, copy[:, k - 1])
        if 0 in dists:
            orig_before[0], copy_before[0] = s_o, s_c

        for e in ells:
            diff = orig_before[e] - copy_before[e]
            for k in range(e, 0, -1):
                diff = step(diff, orig[:, k - 1])
            dists[e][pos:pos + m] = np.sqrt((diff * diff).sum(axis=1) / T)
        pos += m

    rows = []
    for e in ells:
        d = dists[e]
        se = float(np.std(d, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        rows.append(CouplingRow(e, float(d.mean()), se))
    return rows


def decay_fit(rows: Sequence[CouplingRow]) -> dict:
    """Least-squares line through ``(ell, log mean)``: slope, intercept and R^2."""
    ell = np.array([r.ell for r in rows], dtype=float)
    mean = np.array([r.mean for r in rows])
    if np.any(mean <= 0) or len(rows) < 2:
        return {"slope": None, "intercept": None, "r2": None}
    y = np.log(mean)
    slope, intercept = np.polyfit(ell, y, 1)
    resid = y - (slope * ell + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}
