"""Pure-numpy reference implementations of the hot kernels.

Row blocks bound temporary-array sizes so large couplings do not allocate
n*m scratch more than once per block.  Semantics match the numba backend
exactly; only performance differs.
"""

from __future__ import annotations

import numpy as np

_BLOCK_ENTRIES = 2_000_000


def _row_blocks(n: int, m: int):
    step = max(1, _BLOCK_ENTRIES // max(1, m))
    for start in range(0, n, step):
        yield start, min(n, start + step)


def dual_update(cost: np.ndarray, other: np.ndarray, log_marginal: np.ndarray,
                eps: float) -> np.ndarray:
    """Soft-min update of one dual potential.

    Returns out[i] = eps*log_marginal[i] - eps*LSE_j((other[j] - cost[i,j])/eps).
    Row-side update uses the cost matrix, column-side its transpose.
    """
    n, m = cost.shape
    out = np.empty(n)
    for lo, hi in _row_blocks(n, m):
        t = other[None, :] - cost[lo:hi]
        shift = t.max(axis=1)
        s = np.exp((t - shift[:, None]) / eps).sum(axis=1)
        out[lo:hi] = eps * (log_marginal[lo:hi] - np.log(s)) - shift
    return out


def marginal_sums(cost: np.ndarray, own: np.ndarray, other: np.ndarray,
                  eps: float) -> np.ndarray:
    """Row sums of exp((own_i + other_j - cost_ij)/eps)."""
    n, m = cost.shape
    out = np.empty(n)
    for lo, hi in _row_blocks(n, m):
        t = other[None, :] - cost[lo:hi]
        shift = t.max(axis=1)
        s = np.exp((t - shift[:, None]) / eps).sum(axis=1)
        out[lo:hi] = np.exp((own[lo:hi] + shift) / eps) * s
    return out


def plan_dense(cost: np.ndarray, f: np.ndarray, g: np.ndarray,
               eps: float) -> np.ndarray:
    return np.exp((f[:, None] + g[None, :] - cost) / eps)


def plan_triplets(cost: np.ndarray, f: np.ndarray, g: np.ndarray, eps: float,
                  rel_threshold: float):
    """Sparse plan entries >= rel_threshold * max entry, in row-major order."""
    n, m = cost.shape
    exponents = f[:, None] + g[None, :] - cost
    cut = exponents.max() + eps * np.log(rel_threshold)
    rows, cols = np.nonzero(exponents >= cut)
    vals = np.exp(exponents[rows, cols] / eps)
    return rows.astype(np.int64), cols.astype(np.int64), vals


_TIE_EPS = 1e-9


def _axis_cells(p: np.ndarray, origin: float, h: float, count: int):
    """Nearest cell per point along one axis, splitting exact half-way ties.

    Returns (lo, hi, w_lo) arrays; a point equidistant from two centers puts
    half its mass on each, which prevents systematic aliasing for rational
    interpolation parameters on commensurate supports.
    """
    fx = (p - origin) / h
    lo = np.floor(fx).astype(np.int64)
    frac = fx - lo
    tie = np.abs(frac - 0.5) <= _TIE_EPS
    up = frac > 0.5
    lo = lo + np.where(tie, 0, up.astype(np.int64))
    hi = lo + tie.astype(np.int64)
    w_lo = np.where(tie, 0.5, 1.0)
    np.clip(lo, 0, count - 1, out=lo)
    np.clip(hi, 0, count - 1, out=hi)
    return lo, hi, w_lo


def _deposit(field, px, pz, w, x0, z0, hx, hz, nx, nz) -> None:
    ix_lo, ix_hi, wx = _axis_cells(px, x0, hx, nx)
    iz_lo, iz_hi, wz = _axis_cells(pz, z0, hz, nz)
    np.add.at(field, iz_lo * nx + ix_lo, w * wx * wz)
    tx = ix_hi != ix_lo
    tz = iz_hi != iz_lo
    if np.any(tx):
        np.add.at(field, (iz_lo * nx + ix_hi)[tx], (w * (1.0 - wx) * wz)[tx])
    if np.any(tz):
        np.add.at(field, (iz_hi * nx + ix_lo)[tz], (w * wx * (1.0 - wz))[tz])
        both = tx & tz
        if np.any(both):
            np.add.at(field, (iz_hi * nx + ix_hi)[both],
                      (w * (1.0 - wx) * (1.0 - wz))[both])


def scatter_plan_dense(plan: np.ndarray, src_xy: np.ndarray, dst_xy: np.ndarray,
                       alpha: float, x0: float, z0: float, hx: float, hz: float,
                       nx: int, nz: int) -> np.ndarray:
    """Accumulate plan mass at the nearest grid cell of each displaced atom."""
    n, m = plan.shape
    field = np.zeros(nx * nz)
    for lo, hi in _row_blocks(n, m):
        px = ((1.0 - alpha) * src_xy[lo:hi, 0:1] + alpha * dst_xy[None, :, 0]).ravel()
        pz = ((1.0 - alpha) * src_xy[lo:hi, 1:2] + alpha * dst_xy[None, :, 1]).ravel()
        _deposit(field, px, pz, plan[lo:hi].ravel(), x0, z0, hx, hz, nx, nz)
    return field


def scatter_plan_triplets(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray,
                          src_xy: np.ndarray, dst_xy: np.ndarray, alpha: float,
                          x0: float, z0: float, hx: float, hz: float,
                          nx: int, nz: int) -> np.ndarray:
    field = np.zeros(nx * nz)
    px = (1.0 - alpha) * src_xy[rows, 0] + alpha * dst_xy[cols, 0]
    pz = (1.0 - alpha) * src_xy[rows, 1] + alpha * dst_xy[cols, 1]
    _deposit(field, px, pz, vals, x0, z0, hx, hz, nx, nz)
    return field
