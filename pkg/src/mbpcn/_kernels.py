"""Numba stencil kernels for the solver hot path.

All kernels work on C-contiguous (M, M) float64 arrays and apply the
five-point Neumann stencil with clamped neighbour indices: a neighbour outside
the grid is replaced by the cell itself, so its difference (the boundary flux)
is exactly zero.  Kernels that reduce are allowed to reassociate the sum so the
loops vectorize; pointwise results are unaffected.
"""

import os

import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is too old for numba; try OpenMP before the workqueue fallback
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

_REDUCE = {"reassoc"}


def set_threads(n: int) -> None:
    """Cap kernel parallelism; ``n = 0`` restores the default."""
    numba.set_num_threads(n if n > 0 else numba.config.NUMBA_DEFAULT_NUM_THREADS)


@njit(parallel=True, cache=True)
def laplacian_into(u, inv_h2, out):
    m, n = u.shape
    for i in prange(m):
        im = max(i - 1, 0)
        ip = min(i + 1, m - 1)
        for j in range(n):
            jm = max(j - 1, 0)
            jp = min(j + 1, n - 1)
            v = u[i, j]
            out[i, j] = ((u[im, j] - v) + (u[ip, j] - v) + (u[i, jm] - v) + (u[i, jp] - v)) * inv_h2


@njit(parallel=True, cache=True)
def helmholtz_into(u, lam, c, kappa, inv_h2, out):
    """out = c*u - kappa * lam * lap(u)"""
    m, n = u.shape
    for i in prange(m):
        im = max(i - 1, 0)
        ip = min(i + 1, m - 1)
        for j in range(n):
            jm = max(j - 1, 0)
            jp = min(j + 1, n - 1)
            v = u[i, j]
            s = (u[im, j] - v) + (u[ip, j] - v) + (u[i, jm] - v) + (u[i, jp] - v)
            out[i, j] = c * v - kappa * lam[i, j] * s * inv_h2


@njit(parallel=True, cache=True)
def _sym_into(u, inv_lam, c, kappa, inv_h2, out):
    # out = (c/lam) u - kappa lap(u)
    m, n = u.shape
    for i in prange(m):
        im = max(i - 1, 0)
        ip = min(i + 1, m - 1)
        for j in range(n):
            jm = max(j - 1, 0)
            jp = min(j + 1, n - 1)
            v = u[i, j]
            s = (u[im, j] - v) + (u[ip, j] - v) + (u[i, jm] - v) + (u[i, jp] - v)
            out[i, j] = c * inv_lam[i, j] * v - kappa * s * inv_h2


@njit(parallel=True, cache=True, fastmath=_REDUCE)
def _dot(a, b):
    m, n = a.shape
    s = 0.0
    for i in prange(m):
        row = 0.0
        for j in range(n):
            row += a[i, j] * b[i, j]
        s += row
    return s


@njit(parallel=True, cache=True, fastmath=_REDUCE)
def _weighted_norm(w, r):
    # ||w * r||_2
    m, n = r.shape
    s = 0.0
    for i in prange(m):
        row = 0.0
        for j in range(n):
            t = w[i, j] * r[i, j]
            row += t * t
        s += row
    return np.sqrt(s)


@njit(parallel=True, cache=True, fastmath=_REDUCE)
def _norm(r):
    m, n = r.shape
    s = 0.0
    for i in prange(m):
        row = 0.0
        for j in range(n):
            row += r[i, j] * r[i, j]
        s += row
    return np.sqrt(s)


@njit(parallel=True, cache=True, fastmath=_REDUCE)
def _cg_update(x, r, z, p, ap, dinv, lam, alpha):
    # x += alpha p; r -= alpha ap; z = dinv r; returns (<r, z>, ||lam r||^2)
    m, n = x.shape
    rz = 0.0
    res2 = 0.0
    for i in prange(m):
        row_rz = 0.0
        row_res = 0.0
        for j in range(n):
            x[i, j] += alpha * p[i, j]
            rr = r[i, j] - alpha * ap[i, j]
            r[i, j] = rr
            zz = dinv[i, j] * rr
            z[i, j] = zz
            row_rz += rr * zz
            t = lam[i, j] * rr
            row_res += t * t
        rz += row_rz
        res2 += row_res
    return rz, res2


@njit(parallel=True, cache=True)
def _axpby(z, beta, p):
    # p = z + beta p
    m, n = p.shape
    for i in prange(m):
        for j in range(n):
            p[i, j] = z[i, j] + beta * p[i, j]


@njit(parallel=True, cache=True)
def _jacobi(lam, c, kappa, inv_h2, symmetric):
    m, n = lam.shape
    dinv = np.empty_like(lam)
    for i in prange(m):
        nx = (i > 0) + (i < m - 1)
        for j in range(n):
            k = kappa * (nx + (j > 0) + (j < n - 1)) * inv_h2
            if symmetric:
                dinv[i, j] = 1.0 / (c / lam[i, j] + k)
            else:
                dinv[i, j] = 1.0 / (c + lam[i, j] * k)
    return dinv


@njit(cache=True)
def pcg_symmetrized(lam, c, kappa, inv_h2, rhs, x, target, maxiter):
    """Jacobi-preconditioned CG on ``(c/lam - kappa D) x = rhs/lam``.

    The stopping test is on ``lam * r``, which is the residual of the original
    system ``(c - kappa lam D) x = rhs``.  ``x`` is updated in place.
    Returns ``(iterations, residual_norm)``.
    """
    inv_lam = 1.0 / lam
    dinv = _jacobi(lam, c, kappa, inv_h2, True)
    ap = np.empty_like(x)
    _sym_into(x, inv_lam, c, kappa, inv_h2, ap)
    r = rhs * inv_lam - ap
    res = _weighted_norm(lam, r)
    if res <= target:
        return 0, res
    z = dinv * r
    p = z.copy()
    rz = _dot(r, z)
    for k in range(1, maxiter + 1):
        _sym_into(p, inv_lam, c, kappa, inv_h2, ap)
        alpha = rz / _dot(p, ap)
        rz_new, res2 = _cg_update(x, r, z, p, ap, dinv, lam, alpha)
        res = np.sqrt(res2)
        if res <= target or not np.isfinite(res):
            return k, res
        _axpby(z, rz_new / rz, p)
        rz = rz_new
    return maxiter, res


@njit(parallel=True, cache=True)
def _bicg_p(r, p, v, y, dinv, beta, omega):
    m, n = r.shape
    for i in prange(m):
        for j in range(n):
            pp = r[i, j] + beta * (p[i, j] - omega * v[i, j])
            p[i, j] = pp
            y[i, j] = dinv[i, j] * pp


@njit(parallel=True, cache=True, fastmath=_REDUCE)
def _bicg_s(r, x, v, y, zz, dinv, alpha):
    # r -= alpha v; x += alpha y; zz = dinv r; returns ||r||^2
    m, n = r.shape
    s = 0.0
    for i in prange(m):
        row = 0.0
        for j in range(n):
            rr = r[i, j] - alpha * v[i, j]
            r[i, j] = rr
            x[i, j] += alpha * y[i, j]
            zz[i, j] = dinv[i, j] * rr
            row += rr * rr
        s += row
    return s


@njit(parallel=True, cache=True, fastmath=_REDUCE)
def _bicg_r(r, x, t, zz, omega):
    m, n = r.shape
    s = 0.0
    for i in prange(m):
        row = 0.0
        for j in range(n):
            x[i, j] += omega * zz[i, j]
            rr = r[i, j] - omega * t[i, j]
            r[i, j] = rr
            row += rr * rr
        s += row
    return s


@njit(cache=True)
def bicgstab(lam, c, kappa, inv_h2, rhs, x, target, maxiter):
    """Jacobi right-preconditioned BiCGSTAB on ``(c - kappa lam D) x = rhs``.

    Same calling convention as :func:`pcg_symmetrized`.
    """
    dinv = _jacobi(lam, c, kappa, inv_h2, False)
    t = np.empty_like(x)
    helmholtz_into(x, lam, c, kappa, inv_h2, t)
    r = rhs - t
    res = _norm(r)
    if res <= target:
        return 0, res
    r_hat = r.copy()
    rho = 1.0
    alpha = 1.0
    omega = 1.0
    v = np.zeros_like(x)
    p = np.zeros_like(x)
    y = np.empty_like(x)
    zz = np.empty_like(x)
    for k in range(1, maxiter + 1):
        rho_new = _dot(r_hat, r)
        if rho_new == 0.0 or omega == 0.0:
            return k, res
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        _bicg_p(r, p, v, y, dinv, beta, omega)
        helmholtz_into(y, lam, c, kappa, inv_h2, v)
        alpha = rho / _dot(r_hat, v)
        res = np.sqrt(_bicg_s(r, x, v, y, zz, dinv, alpha))
        if res <= target or not np.isfinite(res):
            return k, res
        helmholtz_into(zz, lam, c, kappa, inv_h2, t)
        tt = _dot(t, t)
        omega = _dot(t, r) / tt if tt > 0.0 else 0.0
        res = np.sqrt(_bicg_r(r, x, t, zz, omega))
        if res <= target or not np.isfinite(res):
            return k, res
    return maxiter, res
