"""
Least-squares estimation of the projected volatility equation.

With an orthonormal basis ``phi_1..phi_M`` the coefficient vectors
``y_i = (<y_i^2, phi_m>)_m`` satisfy ``E[y_i | past] = s_i`` where
``s_i = d + A y_{i-1} + B s_{i-1}``. The estimator minimizes

    S_n(theta) = sum_{i=2}^n |y_i - s_hat_i(theta)|^2

with the feasible recursion ``s_hat_1 = 0`` over the compact set

    Theta = {|det A| >= c1, ||B||_F <= c2, all entries in [-box, box]}.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from fgarch import _recursions as rec
from fgarch.basis import BasisSet, project, reconstruct_curve, reconstruct_kernel
from fgarch.errors import ConvergenceError, DimensionError, SingularityError
from fgarch.function_space import Curve, Kernel2D, apply_kernel

__all__ = [
    "CoefSeries",
    "FitOptions",
    "FitResult",
    "Theta",
    "ThetaBounds",
    "asymptotic_cov",
    "delta_tilde",
    "fit",
    "gradient",
    "objective",
    "project_sample",
    "shat_recursion",
    "volatility_filter",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Theta:
    """Projected parameters: intercept coefficients ``d`` and matrices ``A``, ``B``."""

    d: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self) -> None:
        d = np.atleast_1d(np.asarray(self.d, dtype=float)).copy()
        M = d.shape[0]
        A = np.asarray(self.A, dtype=float).reshape(M, M).copy()
        B = np.asarray(self.B, dtype=float).reshape(M, M).copy()
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("theta entries must be finite")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def M(self) -> int:
        return self.d.shape[0]

    def to_vector(self) -> np.ndarray:
        """``(d, A row-major, B row-major)``, length ``M + 2 M^2``."""
        return np.concatenate([self.d, self.A.ravel(), self.B.ravel()])

    @classmethod
    def from_vector(cls, x, M: int) -> Theta:
        x = np.asarray(x, dtype=float)
        if x.shape != (M + 2 * M * M,):
            raise DimensionError(f"parameter vector has shape {x.shape}, expected ({M + 2 * M * M},)")
        return cls(x[:M], x[M:M + M * M].reshape(M, M), x[M + M * M:].reshape(M, M))

    def conjugate(self, signs) -> Theta:
        """Parameters in the basis with ``phi_m`` replaced by ``signs[m] phi_m``."""
        s = np.asarray(signs, dtype=float)
        S = np.outer(s, s)
        return Theta(s * self.d, S * self.A, S * self.B)

    def as_dict(self) -> dict:
        return {"d": self.d.tolist(), "A": self.A.tolist(), "B": self.B.tolist()}


@dataclass(frozen=True)
class ThetaBounds:
    """Compact parameter set: ``|det A| >= c1``, ``||B||_F <= c2``, entries within ``box``."""

    c1: float = 1e-6
    c2: float = 0.98
    box: float = 10.0

    def __post_init__(self) -> None:
        if not self.c1 > 0:
            raise ValueError("c1 must be positive")
        if not 0 < self.c2 < 1:
            raise ValueError("c2 must lie in (0, 1)")
        if not self.box > 0:
            raise ValueError("box must be positive")

    def contains(self, theta: Theta, tol: float = 1e-9) -> bool:
        return (
            abs(np.linalg.det(theta.A)) >= self.c1 - tol
            and np.linalg.norm(theta.B) <= self.c2 + tol
            and np.all(np.abs(theta.to_vector()) <= self.box + tol)
        )


@dataclass(frozen=True, eq=False)
class CoefSeries:
    """Coefficient vectors of the squared curves, one row per day."""

    y2: np.ndarray
    basis: BasisSet | None = None

    def __post_init__(self) -> None:
        y2 = np.asarray(self.y2, dtype=float)
        if y2.ndim == 1:
            y2 = y2[:, None]
        if y2.ndim != 2:
            raise DimensionError("coefficient series must be two-dimensional")
        if not np.all(np.isfinite(y2)):
            raise ValueError("coefficient series must be finite")
        if self.basis is not None and y2.shape[1] != self.basis.M:
            raise DimensionError("series width does not match the basis size")
        object.__setattr__(self, "y2", np.ascontiguousarray(y2))

    @property
    def n(self) -> int:
        return self.y2.shape[0]

    @property
    def M(self) -> int:
        return self.y2.shape[1]


def project_sample(sample, basis: BasisSet) -> CoefSeries:
    """Square each curve pointwise and project onto ``basis``."""
    if isinstance(sample, np.ndarray):
        values = np.atleast_2d(sample)
    else:
        curves = list(sample)
        if any(c.grid != basis.grid for c in curves):
            raise DimensionError("sample and basis live on different grids")
        values = np.array([c.values for c in curves]).reshape(len(curves), basis.grid.T)
    return CoefSeries(project(values**2, basis).reshape(-1, basis.M), basis)


def _check(theta: Theta, series: CoefSeries) -> None:
    if theta.M != series.M:
        raise DimensionError(f"theta has M={theta.M}, series has M={series.M}")


def shat_recursion(theta: Theta, series: CoefSeries) -> np.ndarray:
    """
    Feasible fitted coefficients ``s_hat_2..s_hat_n`` as an ``(n - 1, M)`` array.

    Computed forward from ``s_hat_1 = 0``; this equals the truncated sums
    ``sum_{l<i} B^(l-1) d + sum_{l<i} B^(l-1) A y_{i-l}``.
    """
    _check(theta, series)
    return rec.shat(theta.d, theta.A, theta.B, series.y2)[1:]


def objective(theta: Theta, series: CoefSeries) -> float:
    _check(theta, series)
    return float(rec.objective_grad(theta.d, theta.A, theta.B, series.y2)[0])


def gradient(theta: Theta, series: CoefSeries) -> np.ndarray:
    """Analytic gradient of :func:`objective`, ordered like ``Theta.to_vector``."""
    _check(theta, series)
    return rec.objective_grad(theta.d, theta.A, theta.B, series.y2)[1]


@dataclass
class FitOptions:
    n_starts: int = 8
    maxiter: int = 500
    ftol: float = 1e-12
    seed: int = 0
    min_n: int = 20
    compute_cov: bool = False


@dataclass
class FitResult:
    theta_hat: Theta
    objective_value: float
    converged: bool
    n_starts_used: int
    constraint_active: dict
    delta_hat: Curve | None = None
    alpha_hat: Kernel2D | None = None
    beta_hat: Kernel2D | None = None
    cov: np.ndarray | None = None
    warnings: list = field(default_factory=list)
    starts: list = field(default_factory=list)

    def stderr(self) -> np.ndarray | None:
        if self.cov is None:
            return None
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def to_json(self) -> dict:
        out = {
            "theta": self.theta_hat.to_vector().tolist(),
            "theta_layout": "d, A row-major, B row-major",
            "M": self.theta_hat.M,
            "d": self.theta_hat.d.tolist(),
            "A": self.theta_hat.A.tolist(),
            "B": self.theta_hat.B.tolist(),
            "objective": self.objective_value,
            "converged": self.converged,
            "n_starts_used": self.n_starts_used,
            "constraint_active": self.constraint_active,
            "warnings": self.warnings,
            "starts": self.starts,
            "covariance": None if self.cov is None else self.cov.ravel().tolist(),
            "stderr": None if self.cov is None else self.stderr().tolist(),
        }
        return out


def _signs(y2: np.ndarray) -> np.ndarray:
    # canonical orientation: mean coefficient positive, so fits commute with phi -> -phi
    s = np.sign(y2.mean(axis=0))
    s[s == 0] = 1.0
    return s


def _moment_start(z: np.ndarray, bounds: ThetaBounds) -> np.ndarray:
    n, M = z.shape
    X = np.hstack([np.ones((n - 1, 1)), z[:-1]])
    coef = np.linalg.lstsq(X, z[1:], rcond=None)[0]
    A0 = coef[1:].T
    if abs(np.linalg.det(A0)) < 10 * bounds.c1:
        A0 = A0 + 0.1 * np.eye(M)
    B0 = 0.1 * np.eye(M)
    if np.linalg.norm(B0) > bounds.c2:
        B0 *= 0.5 * bounds.c2 / np.linalg.norm(B0)
    d0 = (np.eye(M) - A0 - B0) @ z.mean(axis=0)
    return np.concatenate([d0, A0.ravel(), B0.ravel()])


def _random_start(z: np.ndarray, base: np.ndarray, bounds: ThetaBounds, rng) -> np.ndarray:
    M = z.shape[1]
    A0 = base[M:M + M * M].reshape(M, M)
    A = A0 * rng.uniform(0.5, 1.5) + 0.1 * rng.standard_normal((M, M))
    if abs(np.linalg.det(A)) < 10 * bounds.c1:
        A = A + 0.1 * np.eye(M)
    R = rng.standard_normal((M, M)) + np.eye(M)
    B = rng.uniform(0.0, 0.9) * bounds.c2 * R / np.linalg.norm(R)
    d = (np.eye(M) - A - B) @ z.mean(axis=0)
    return np.concatenate([d, A.ravel(), B.ravel()])


def _solve_start(x0, z, bounds, d_box, opts):
    M = z.shape[1]
    MM = M * M
    n = z.shape[0]

    def fun(x):
        obj, g = rec.objective_grad(x[:M], x[M:M + MM].reshape(M, M), x[M + MM:].reshape(M, M), z)
        return obj / n, g / n

    sgn = 1.0 if np.linalg.det(x0[M:M + MM].reshape(M, M)) >= 0 else -1.0

    def det_con(x):
        return sgn * np.linalg.det(x[M:M + MM].reshape(M, M)) - bounds.c1

    def det_jac(x):
        A = x[M:M + MM].reshape(M, M)
        jac = np.zeros_like(x)
        if M == 1:
            jac[M] = sgn
        else:
            # d det / dA = adj(A)^T, computed from the SVD so it stays defined near singularity
            U, sv, Vt = np.linalg.svd(A)
            prod = np.array([np.prod(np.delete(sv, k)) for k in range(M)])
            adjT = np.linalg.det(U) * np.linalg.det(Vt) * (U * prod) @ Vt
            jac[M:M + MM] = sgn * adjT.ravel()
        return jac

    def frob_con(x):
        return bounds.c2**2 - float(np.sum(x[M + MM:] ** 2))

    def frob_jac(x):
        jac = np.zeros_like(x)
        jac[M + MM:] = -2.0 * x[M + MM:]
        return jac

    lim = [(-d_box, d_box)] * M + [(-bounds.box, bounds.box)] * (2 * MM)
    x0 = np.clip(x0, [b[0] for b in lim], [b[1] for b in lim])
    res = minimize(
        fun,
        x0,
        jac=True,
        method="SLSQP",
        bounds=lim,
        constraints=[
            {"type": "ineq", "fun": det_con, "jac": det_jac},
            {"type": "ineq", "fun": frob_con, "jac": frob_jac},
        ],
        options={"maxiter": opts.maxiter, "ftol": opts.ftol},
    )
    x = res.x
    feasible = det_con(x) >= -1e-10 and frob_con(x) >= -1e-10
    return x, float(fun(x)[0]) * n, bool(res.success) and feasible, res


def fit(series: CoefSeries, bounds: ThetaBounds | None = None, opts: FitOptions | None = None) -> FitResult:
    """
    Multi-start constrained least squares for ``(d, A, B)``.

    The series is rescaled to unit root-mean-square norm and oriented so that
    each coefficient has positive mean; both transformations are undone on
    the returned estimate. Each start runs SLSQP with the analytic gradient;
    the best converged start (lowest objective, ties to the lowest index) is
    returned.

    Raises
    ------
    ValueError
        If the series is shorter than ``opts.min_n``.
    ConvergenceError
        If no start converges.
    SingularityError
        If ``opts.compute_cov`` is set and the information matrix is singular.
    """
    bounds = bounds or ThetaBounds()
    opts = opts or FitOptions()
    if series.n < max(opts.min_n, 3):
        raise ValueError(f"need at least {max(opts.min_n, 3)} observations, got {series.n}")
    M = series.M

    signs = _signs(series.y2)
    scale = float(np.sqrt(np.mean(np.sum(series.y2**2, axis=1))))
    if scale == 0.0:
        scale = 1.0
    z = np.ascontiguousarray(series.y2 * signs / scale)
    d_box = bounds.box / scale

    base = _moment_start(z, bounds)
    rng = np.random.default_rng(opts.seed)
    starts = [base] + [_random_start(z, base, bounds, rng) for _ in range(max(opts.n_starts, 1) - 1)]

    best = None
    diagnostics = []
    for k, x0 in enumerate(starts):
        x, val, ok, res = _solve_start(x0, z, bounds, d_box, opts)
        diagnostics.append({"start": k, "objective": val * scale**2, "converged": ok, "message": str(res.message), "nit": int(res.nit)})
        if ok and (best is None or val < best[1]):
            best = (x, val)
    if best is None:
        raise ConvergenceError("no optimizer start converged", diagnostics)

    x, val = best
    x = x.copy()
    x[:M] *= scale
    theta = Theta.from_vector(x, M).conjugate(signs)
    value = objective(theta, series)

    det = abs(np.linalg.det(theta.A))
    frob = float(np.linalg.norm(theta.B))
    active = {"c1": bool(det - bounds.c1 <= 1e-8), "c2": bool(bounds.c2 - frob <= 1e-8)}

    result = FitResult(
        theta_hat=theta,
        objective_value=value,
        converged=True,
        n_starts_used=len(starts),
        constraint_active=active,
        starts=diagnostics,
    )
    if series.basis is not None:
        result.delta_hat = reconstruct_curve(theta.d, series.basis)
        result.alpha_hat = reconstruct_kernel(theta.A, series.basis)
        result.beta_hat = reconstruct_kernel(theta.B, series.basis)
        for name, arr in (("delta_hat", result.delta_hat.values), ("alpha_hat", result.alpha_hat.values),
                          ("beta_hat", result.beta_hat.values)):
            if np.min(arr) < 0:
                result.warnings.append(f"{name} takes negative values (min {np.min(arr):.3g})")
    if opts.compute_cov:
        result.cov = asymptotic_cov(theta, series)
    for w in result.warnings:
        log.warning(w)
    return result


def _information(theta: Theta, series: CoefSeries):
    _check(theta, series)
    s, D = rec.jacobians(theta.d, theta.A, theta.B, series.y2)
    D = D[1:]
    r = series.y2[1:] - s[1:]
    N = r.shape[0]
    Q = np.einsum("imk,iml->kl", D, D) / N
    cond = np.linalg.cond(Q)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularityError(f"information matrix is singular (condition number {cond:.3g})")
    return D, r, Q


def asymptotic_cov(theta_hat: Theta, series: CoefSeries, form: str = "sandwich") -> np.ndarray:
    """
    Estimated covariance of ``theta_hat``, scaled by ``1 / n``.

    With ``D_i = ds_hat_i / dtheta``, residuals ``r_i = y_i - s_hat_i`` and
    ``Q = mean D_i' D_i``:

    * ``form='sandwich'`` (default): ``Q^-1 (mean D_i' r_i r_i' D_i) Q^-1 / n``.
    * ``form='factored'``: ``Q^-1 H' J H Q^-1 / n`` with ``H = mean D_i`` and
      ``J = mean r_i r_i'``. The middle factor has rank at most M, so this
      form understates the variance badly whenever ``D_i`` varies over time;
      it is kept for comparison only.

    Raises
    ------
    SingularityError
        If ``Q`` has condition number above 1e12.
    """
    D, r, Q = _information(theta_hat, series)
    N = r.shape[0]
    Qinv = np.linalg.inv(Q)
    if form == "sandwich":
        score = np.einsum("imk,im->ik", D, r)
        meat = score.T @ score / N
    elif form == "factored":
        H = D.mean(axis=0)
        J = r.T @ r / N
        meat = H.T @ J @ H
    else:
        raise ValueError(f"unknown covariance form {form!r}")
    cov = Qinv @ meat @ Qinv / series.n
    return (cov + cov.T) / 2


def delta_tilde(alpha_hat: Kernel2D, beta_hat: Kernel2D, sample) -> Curve:
    """Intercept estimate ``ybar2 - (alpha_hat + beta_hat) ybar2`` from the mean squared curve."""
    grid = alpha_hat.grid
    if isinstance(sample, np.ndarray):
        values = np.atleast_2d(sample)
    else:
        values = np.array([c.values for c in sample])
    if values.shape[1] != grid.T:
        raise DimensionError("sample and kernels live on different grids")
    ybar2 = Curve(grid, (values**2).mean(axis=0))
    return ybar2 - apply_kernel(alpha_hat + beta_hat, ybar2)


def volatility_filter(theta_hat: Theta, series: CoefSeries, basis: BasisSet | None = None):
    """
    Fitted volatility curves ``sigma_hat_i^2 = sum_m s_hat_{i,m} phi_m``, ``i = 1..n``.

    Negative values are clipped to zero. Returns ``(curves, n_clipped)`` where
    ``n_clipped`` counts clipped grid values.
    """
    basis = basis or series.basis
    if basis is None:
        raise ValueError("a basis is needed to reconstruct curves")
    _check(theta_hat, series)
    s = rec.shat(theta_hat.d, theta_hat.A, theta_hat.B, series.y2)
    values = s @ basis.values
    n_clipped = int(np.sum(values < 0))
    values = np.clip(values, 0.0, None)
    return [Curve(basis.grid, v) for v in values], n_clipped
