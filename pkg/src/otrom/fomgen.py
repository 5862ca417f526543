"""Desk-scale trajectory generators used as ground truth.

A conservative first-order upwind / central-diffusion scheme advances a
Gaussian blob under a constant or rigidly rotating velocity field.  The
flux form shares faces between neighboring cells, so total mass is conserved
to round-off under periodic closure.  ``analytic_gaussian`` provides the
closed-form translating (and spreading) solution for constant velocity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CflViolation, UnsupportedSpec
from .measure import Grid, Snapshot, Trajectory

__all__ = [
    "ConstantVelocity",
    "RigidRotation",
    "BlobSpec",
    "FomConfig",
    "simulate",
    "analytic_gaussian",
]


@dataclass(frozen=True)
class ConstantVelocity:
    vx: float
    vz: float


@dataclass(frozen=True)
class RigidRotation:
    """v = omega x r about (cx, cz); divergence-free, also discretely."""

    cx: float
    cz: float
    omega: float


@dataclass(frozen=True)
class BlobSpec:
    """Isotropic Gaussian initial condition.

    cutoff (in units of sigma) zeroes the far field exactly, keeping measure
    supports compact; None keeps the full tails.
    """

    x: float
    z: float
    sigma: float
    amplitude: float = 1.0
    cutoff: float | None = None


@dataclass(frozen=True)
class FomConfig:
    nx: int
    nz: int
    hx: float
    hz: float
    velocity: ConstantVelocity | RigidRotation
    blob: BlobSpec
    nu: float = 0.0
    dt: float = 1.0
    t_f: float = 1.0
    save_stride: int = 1
    boundary: str = "periodic"
    origin: tuple[float, float] = (0.0, 0.0)
    # Upwind transport spreads harmless sub-round-off values across the whole
    # grid, which would blow up downstream measure supports.  When set, cells
    # below support_floor * max|field| are zeroed after each step and each
    # sign part is rescaled so its total mass is unchanged.
    support_floor: float | None = None

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("diffusivity must be >= 0")
        if self.support_floor is not None and not 0 < self.support_floor < 1e-3:
            raise ValueError("support_floor must lie in (0, 1e-3)")
        if self.dt <= 0 or self.t_f <= 0:
            raise ValueError("dt and t_f must be positive")
        if self.save_stride < 1:
            raise ValueError("save_stride must be >= 1")
        if self.boundary not in ("periodic", "outflow"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        steps = self.t_f / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("t_f must be an integer number of dt steps")
        if round(steps) % self.save_stride != 0:
            raise ValueError("step count must be a multiple of save_stride")
        h_min = min(self.hx, self.hz)
        cfl = self.max_speed() * self.dt / h_min
        if cfl > 0.5 + 1e-12:
            raise CflViolation(f"advective CFL {cfl:.3f} > 0.5")
        if self.nu * self.dt / h_min ** 2 > 0.25 + 1e-12:
            raise CflViolation(
                f"diffusive number {self.nu * self.dt / h_min ** 2:.3f} > 0.25"
            )

    @property
    def grid(self) -> Grid:
        return Grid(nx=self.nx, nz=self.nz, hx=self.hx, hz=self.hz,
                    origin=self.origin)

    @property
    def n_steps(self) -> int:
        return round(self.t_f / self.dt)

    @property
    def dt_save(self) -> float:
        return self.save_stride * self.dt

    def max_speed(self) -> float:
        v = self.velocity
        if isinstance(v, ConstantVelocity):
            return float(np.hypot(v.vx, v.vz))
        x0, z0 = self.origin
        corners_x = np.array([x0, x0 + (self.nx - 1) * self.hx])
        corners_z = np.array([z0, z0 + (self.nz - 1) * self.hz])
        r = max(
            np.hypot(cx - v.cx, cz - v.cz)
            for cx in corners_x for cz in corners_z
        )
        return abs(v.omega) * float(r)


def _coords(cfg: FomConfig):
    x = cfg.origin[0] + cfg.hx * np.arange(cfg.nx)
    z = cfg.origin[1] + cfg.hz * np.arange(cfg.nz)
    return np.meshgrid(x, z)  # (nz, nx) each


def _initial_field(cfg: FomConfig) -> np.ndarray:
    xx, zz = _coords(cfg)
    b = cfg.blob
    r2 = (xx - b.x) ** 2 + (zz - b.z) ** 2
    field = b.amplitude * np.exp(-r2 / (2.0 * b.sigma ** 2))
    if b.cutoff is not None:
        field[r2 > (b.cutoff * b.sigma) ** 2] = 0.0
    return field


def _face_velocities(cfg: FomConfig):
    """Normal velocities on the left x-faces and bottom z-faces of each cell."""
    x0, z0 = cfg.origin
    xc = x0 + cfg.hx * np.arange(cfg.nx)
    zc = z0 + cfg.hz * np.arange(cfg.nz)
    xf = xc - 0.5 * cfg.hx
    zf = zc - 0.5 * cfg.hz
    v = cfg.velocity
    if isinstance(v, ConstantVelocity):
        vxf = np.full((cfg.nz, cfg.nx), v.vx)
        vzf = np.full((cfg.nz, cfg.nx), v.vz)
        return vxf, vzf
    xg, zg = np.meshgrid(xf, zc)
    vxf = -v.omega * (zg - v.cz)
    xg, zg = np.meshgrid(xc, zf)
    vzf = v.omega * (xg - v.cx)
    return vxf, vzf


def _clamp_support(c: np.ndarray, floor: float) -> np.ndarray:
    """Zero sub-floor cells, rescaling each sign part to conserve its mass."""
    cut = floor * np.abs(c).max()
    clipped = np.where(np.abs(c) < cut, 0.0, c)
    for sign in (1.0, -1.0):
        part = np.maximum(sign * c, 0.0)
        kept = np.maximum(sign * clipped, 0.0)
        total, kept_total = part.sum(), kept.sum()
        if kept_total > 0.0 and kept_total != total:
            clipped = np.where(sign * clipped > 0,
                               clipped * (total / kept_total), clipped)
    return clipped


def simulate(cfg: FomConfig) -> Trajectory:
    """Explicit upwind advection-diffusion run, snapshots every save_stride."""
    grid = cfg.grid
    c = _initial_field(cfg)
    vxf, vzf = _face_velocities(cfg)
    periodic = cfg.boundary == "periodic"
    snapshots = [Snapshot(values=c.ravel().copy(), time=0.0, grid=grid)]

    for step in range(1, cfg.n_steps + 1):
        if periodic:
            left = np.roll(c, 1, axis=1)
            below = np.roll(c, 1, axis=0)
            fx = np.where(vxf > 0, vxf * left, vxf * c)
            fz = np.where(vzf > 0, vzf * below, vzf * c)
            div = (np.roll(fx, -1, axis=1) - fx) / cfg.hx \
                + (np.roll(fz, -1, axis=0) - fz) / cfg.hz
            lap = (np.roll(c, -1, axis=1) - 2 * c + np.roll(c, 1, axis=1)) / cfg.hx ** 2 \
                + (np.roll(c, -1, axis=0) - 2 * c + np.roll(c, 1, axis=0)) / cfg.hz ** 2
        else:
            cp = np.pad(c, 1)  # clamped: zero ghosts, no inflow, free outflow
            vxe = np.pad(vxf, ((0, 0), (0, 1)), mode="edge")
            vze = np.pad(vzf, ((0, 1), (0, 0)), mode="edge")
            lx, rx = cp[1:-1, :-1], cp[1:-1, 1:]
            fx = np.where(vxe > 0, vxe * lx, vxe * rx)
            lz, rz = cp[:-1, 1:-1], cp[1:, 1:-1]
            fz = np.where(vze > 0, vze * lz, vze * rz)
            div = (fx[:, 1:] - fx[:, :-1]) / cfg.hx + (fz[1:, :] - fz[:-1, :]) / cfg.hz
            lap = (cp[1:-1, 2:] - 2 * c + cp[1:-1, :-2]) / cfg.hx ** 2 \
                + (cp[2:, 1:-1] - 2 * c + cp[:-2, 1:-1]) / cfg.hz ** 2
        c = c - cfg.dt * div + cfg.dt * cfg.nu * lap
        if cfg.support_floor is not None:
            c = _clamp_support(c, cfg.support_floor)
        if step % cfg.save_stride == 0:
            k = step // cfg.save_stride
            snapshots.append(
                Snapshot(values=c.ravel().copy(), time=k * cfg.dt_save, grid=grid)
            )
    return Trajectory(snapshots=tuple(snapshots), dt=cfg.dt_save, t_f=cfg.t_f)


def analytic_gaussian(cfg: FomConfig) -> Trajectory:
    """Exact translating/spreading Gaussian on the same save lattice.

    Constant velocity only; the blob cutoff is ignored (there is no closed
    form for a truncated Gaussian under diffusion).
    """
    if not isinstance(cfg.velocity, ConstantVelocity):
        raise UnsupportedSpec("analytic solution requires constant velocity")
    grid = cfg.grid
    xx, zz = _coords(cfg)
    b = cfg.blob
    v = cfg.velocity
    snapshots = []
    n_saves = cfg.n_steps // cfg.save_stride
    for k in range(n_saves + 1):
        t = k * cfg.dt_save
        var = b.sigma ** 2 + 2.0 * cfg.nu * t
        r2 = (xx - b.x - v.vx * t) ** 2 + (zz - b.z - v.vz * t) ** 2
        field = b.amplitude * (b.sigma ** 2 / var) * np.exp(-r2 / (2.0 * var))
        snapshots.append(Snapshot(values=field.ravel(), time=t, grid=grid))
    return Trajectory(snapshots=tuple(snapshots), dt=cfg.dt_save, t_f=cfg.t_f)
