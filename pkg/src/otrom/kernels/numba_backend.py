"""Numba-compiled hot kernels.

Each function is the drop-in twin of its numpy_backend counterpart.  Loops
are serial and row-ordered, so results are deterministic and independent of
thread configuration; nogil lets callers run independent solves in threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def dual_update(cost, other, log_marginal, eps):
    n, m = cost.shape
    out = np.empty(n)
    for i in range(n):
        shift = -np.inf
        for j in range(m):
            t = other[j] - cost[i, j]
            if t > shift:
                shift = t
        s = 0.0
        for j in range(m):
            s += np.exp((other[j] - cost[i, j] - shift) / eps)
        out[i] = eps * (log_marginal[i] - np.log(s)) - shift
    return out


@njit(cache=True, nogil=True)
def marginal_sums(cost, own, other, eps):
    n, m = cost.shape
    out = np.empty(n)
    for i in range(n):
        shift = -np.inf
        for j in range(m):
            t = other[j] - cost[i, j]
            if t > shift:
                shift = t
        s = 0.0
        for j in range(m):
            s += np.exp((other[j] - cost[i, j] - shift) / eps)
        out[i] = np.exp((own[i] + shift) / eps) * s
    return out


@njit(cache=True, nogil=True)
def plan_dense(cost, f, g, eps):
    n, m = cost.shape
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = np.exp((f[i] + g[j] - cost[i, j]) / eps)
    return out


@njit(cache=True, nogil=True)
def plan_triplets(cost, f, g, eps, rel_threshold):
    n, m = cost.shape
    emax = -np.inf
    for i in range(n):
        for j in range(m):
            e = f[i] + g[j] - cost[i, j]
            if e > emax:
                emax = e
    cut = emax + eps * np.log(rel_threshold)
    nnz = 0
    for i in range(n):
        for j in range(m):
            if f[i] + g[j] - cost[i, j] >= cut:
                nnz += 1
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    k = 0
    for i in range(n):
        for j in range(m):
            e = f[i] + g[j] - cost[i, j]
            if e >= cut:
                rows[k] = i
                cols[k] = j
                vals[k] = np.exp(e / eps)
                k += 1
    return rows, cols, vals


_TIE_EPS = 1e-9


@njit(cache=True, nogil=True, inline="always")
def _axis_cells(p, origin, h, count):
    """Nearest cell along one axis, splitting an exact half-way tie.

    Returns (lo, hi, w_lo): the one or two co-nearest cells and the weight of
    the lower one.  Points equidistant from two centers would otherwise
    alias systematically for rational interpolation parameters on
    commensurate supports.
    """
    fx = (p - origin) / h
    lo = int(np.floor(fx))
    frac = fx - lo
    if abs(frac - 0.5) <= _TIE_EPS:
        hi = lo + 1
        w_lo = 0.5
    elif frac > 0.5:
        lo = lo + 1
        hi = lo
        w_lo = 1.0
    else:
        hi = lo
        w_lo = 1.0
    if lo < 0:
        lo = 0
    elif lo > count - 1:
        lo = count - 1
    if hi < 0:
        hi = 0
    elif hi > count - 1:
        hi = count - 1
    return lo, hi, w_lo


@njit(cache=True, nogil=True, inline="always")
def _deposit(field, px, pz, w, x0, z0, hx, hz, nx, nz):
    ix_lo, ix_hi, wx = _axis_cells(px, x0, hx, nx)
    iz_lo, iz_hi, wz = _axis_cells(pz, z0, hz, nz)
    field[iz_lo * nx + ix_lo] += w * wx * wz
    if ix_hi != ix_lo:
        field[iz_lo * nx + ix_hi] += w * (1.0 - wx) * wz
    if iz_hi != iz_lo:
        field[iz_hi * nx + ix_lo] += w * wx * (1.0 - wz)
        if ix_hi != ix_lo:
            field[iz_hi * nx + ix_hi] += w * (1.0 - wx) * (1.0 - wz)


@njit(cache=True, nogil=True)
def scatter_plan_dense(plan, src_xy, dst_xy, alpha, x0, z0, hx, hz, nx, nz):
    n, m = plan.shape
    field = np.zeros(nx * nz)
    for i in range(n):
        sx = (1.0 - alpha) * src_xy[i, 0]
        sz = (1.0 - alpha) * src_xy[i, 1]
        for j in range(m):
            px = sx + alpha * dst_xy[j, 0]
            pz = sz + alpha * dst_xy[j, 1]
            _deposit(field, px, pz, plan[i, j], x0, z0, hx, hz, nx, nz)
    return field


@njit(cache=True, nogil=True)
def scatter_plan_triplets(rows, cols, vals, src_xy, dst_xy, alpha,
                          x0, z0, hx, hz, nx, nz):
    field = np.zeros(nx * nz)
    for k in range(rows.size):
        px = (1.0 - alpha) * src_xy[rows[k], 0] + alpha * dst_xy[cols[k], 0]
        pz = (1.0 - alpha) * src_xy[rows[k], 1] + alpha * dst_xy[cols[k], 1]
        _deposit(field, px, pz, vals[k], x0, z0, hx, hz, nx, nz)
    return field
