"""
Compiled recursions for the projected volatility equation.

Parameter vectors are ordered ``(d, vec(A), vec(B))`` with row-major
vectorization, ``P = M + 2 M^2`` entries in total. Row ``i`` of ``y2`` is the
coefficient vector of day ``i + 1``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def shat(d, A, B, y2):
    """s_1 = 0, s_i = d + A y_{i-1} + B s_{i-1}."""
    n, M = y2.shape
    s = np.zeros((n, M))
    for i in range(1, n):
        for p in range(M):
            acc = d[p]
            for q in range(M):
                acc += A[p, q] * y2[i - 1, q] + B[p, q] * s[i - 1, q]
            s[i, p] = acc
    return s


@njit(cache=True)
def objective_grad(d, A, B, y2):
    """Sum of squared residuals over days 2..n and its gradient."""
    n, M = y2.shape
    MM = M * M
    P = M + 2 * MM
    s_prev = np.zeros(M)
    s_cur = np.zeros(M)
    D_prev = np.zeros((M, P))
    D_cur = np.zeros((M, P))
    grad = np.zeros(P)
    obj = 0.0
    for i in range(1, n):
        for p in range(M):
            acc = d[p]
            for q in range(M):
                acc += A[p, q] * y2[i - 1, q] + B[p, q] * s_prev[q]
            s_cur[p] = acc
        # D_i = direct term + B D_{i-1}
        for p in range(M):
            for k in range(P):
                acc = 0.0
                for q in range(M):
                    acc += B[p, q] * D_prev[q, k]
                D_cur[p, k] = acc
            D_cur[p, p] += 1.0
            for q in range(M):
                D_cur[p, M + p * M + q] += y2[i - 1, q]
                D_cur[p, M + MM + p * M + q] += s_prev[q]
        for p in range(M):
            r = y2[i, p] - s_cur[p]
            obj += r * r
            for k in range(P):
                grad[k] -= 2.0 * r * D_cur[p, k]
        for p in range(M):
            s_prev[p] = s_cur[p]
            for k in range(P):
                D_prev[p, k] = D_cur[p, k]
    return obj, grad


@njit(cache=True)
def jacobians(d, A, B, y2):
    """Fitted values ``s`` (n, M) and derivatives ``ds_i/dtheta`` (n, M, P); row 0 is zero."""
    n, M = y2.shape
    MM = M * M
    P = M + 2 * MM
    s = np.zeros((n, M))
    D = np.zeros((n, M, P))
    for i in range(1, n):
        for p in range(M):
            acc = d[p]
            for q in range(M):
                acc += A[p, q] * y2[i - 1, q] + B[p, q] * s[i - 1, q]
            s[i, p] = acc
        for p in range(M):
            for k in range(P):
                acc = 0.0
                for q in range(M):
                    acc += B[p, q] * D[i - 1, q, k]
                D[i, p, k] = acc
            D[i, p, p] += 1.0
            for q in range(M):
                D[i, p, M + p * M + q] += y2[i - 1, q]
                D[i, p, M + MM + p * M + q] += s[i - 1, q]
    return s, D
