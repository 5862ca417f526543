"""Grid geometry and field <-> discrete-measure conversion.

A scalar snapshot on a uniform 2D grid is split into nonnegative sign parts,
each normalized to a unit-mass discrete measure on the grid's cell centers.
All types here are immutable after construction and safe to share across
threads; the operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllZeroField, IndexOutOfGrid

__all__ = [
    "Grid",
    "Snapshot",
    "Trajectory",
    "DiscreteMeasure",
    "SignedDecomposition",
    "field_to_measures",
    "measures_to_field",
]

_WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform structured grid of cell centers in the (x, z) plane.

    Linear cell index l corresponds to (ix, iz) = (l % nx, l // nx).
    """

    nx: int
    nz: int
    hx: float
    hz: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 1 or self.nz < 1:
            raise ValueError(f"grid dims must be >= 1, got {self.nx}x{self.nz}")
        if self.hx <= 0 or self.hz <= 0:
            raise ValueError(f"grid spacing must be > 0, got hx={self.hx}, hz={self.hz}")

    @property
    def n_cells(self) -> int:
        return self.nx * self.nz

    def cell_center(self, l: int) -> tuple[float, float]:
        """Coordinates of the center of cell l."""
        if not 0 <= l < self.n_cells:
            raise IndexOutOfGrid(f"cell index {l} outside [0, {self.n_cells})")
        ix = l % self.nx
        iz = l // self.nx
        return (self.origin[0] + ix * self.hx, self.origin[1] + iz * self.hz)

    def cell_centers(self, indices=None) -> np.ndarray:
        """(k, 2) array of cell-center coordinates, all cells by default."""
        if indices is None:
            indices = np.arange(self.n_cells)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_cells):
            raise IndexOutOfGrid("support index outside grid")
        ix = idx % self.nx
        iz = idx // self.nx
        out = np.empty((idx.size, 2), dtype=np.float64)
        out[:, 0] = self.origin[0] + ix * self.hx
        out[:, 1] = self.origin[1] + iz * self.hz
        return out

    def nearest_cell(self, p) -> int:
        """Linear index of the cell center closest to point p.

        Points outside the bounding box clamp to the boundary cell, so the
        map is total; on-grid centers are fixed points.
        """
        ix = int(np.clip(np.rint((p[0] - self.origin[0]) / self.hx), 0, self.nx - 1))
        iz = int(np.clip(np.rint((p[1] - self.origin[1]) / self.hz), 0, self.nz - 1))
        return iz * self.nx + ix


@dataclass(frozen=True)
class Snapshot:
    """Discretized scalar field at one time instant."""

    values: np.ndarray
    time: float
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(
                f"snapshot has {v.shape} values for a {self.grid.n_cells}-cell grid"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("snapshot contains non-finite values")


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled sequence of snapshots on a shared grid."""

    snapshots: tuple[Snapshot, ...]
    dt: float
    t_f: float

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        if not snaps:
            raise ValueError("trajectory needs at least one snapshot")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        g = snaps[0].grid
        for k, s in enumerate(snaps):
            if s.grid != g:
                raise ValueError("snapshots do not share one grid")
            if abs(s.time - k * self.dt) > 1e-9 * max(1.0, self.t_f):
                raise ValueError(
                    f"snapshot {k} at t={s.time} is not on the k*dt lattice (dt={self.dt})"
                )

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def matrix(self) -> np.ndarray:
        """Snapshot matrix with one column per time instant (N_h x N_T)."""
        return np.column_stack([s.values for s in self.snapshots])


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability weights on a subset of grid cells, plus the L1 mass that
    was divided out during normalization."""

    support: np.ndarray
    weights: np.ndarray
    mass: float

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.int64)
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "weights", w)
        if sup.shape != w.shape or sup.ndim != 1:
            raise ValueError("support and weights must be matching 1D arrays")
        if sup.size == 0:
            raise ValueError("measure needs at least one atom")
        if np.unique(sup).size != sup.size:
            raise ValueError("support indices must be unique")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()}, not 1")
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    @property
    def n_atoms(self) -> int:
        return self.support.size


@dataclass(frozen=True)
class SignedDecomposition:
    """Positive/negative sign parts of a snapshot, either possibly absent."""

    positive: DiscreteMeasure | None = None
    negative: DiscreteMeasure | None = None
    grid: Grid = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.positive is None and self.negative is None:
            raise ValueError("decomposition needs at least one sign part")


def _part_from_values(values: np.ndarray) -> DiscreteMeasure | None:
    mass = float(values.sum())
    if mass == 0.0:
        return None
    support = np.nonzero(values)[0]
    return DiscreteMeasure(support=support, weights=values[support] / mass, mass=mass)


def field_to_measures(s: Snapshot) -> SignedDecomposition:
    """Split a snapshot into normalized positive and negative measures.

    Raises AllZeroField for an identically zero snapshot, which has no
    transportable content.
    """
    v = s.values
    pos = _part_from_values(np.maximum(v, 0.0))
    neg = _part_from_values(np.maximum(-v, 0.0))
    if pos is None and neg is None:
        raise AllZeroField(f"snapshot at t={s.time} has zero L1 mass")
    return SignedDecomposition(positive=pos, negative=neg, grid=s.grid)


def measures_to_field(d: SignedDecomposition, g: Grid, time: float = 0.0) -> Snapshot:
    """Reassemble the field mass*weights(positive) - mass*weights(negative)."""
    values = np.zeros(g.n_cells)
    for part, sign in ((d.positive, 1.0), (d.negative, -1.0)):
        if part is None:
            continue
        if part.support.min() < 0 or part.support.max() >= g.n_cells:
            raise IndexOutOfGrid(
                f"support index outside [0, {g.n_cells}) for a {g.nx}x{g.nz} grid"
            )
        values[part.support] += sign * part.mass * part.weights
    return Snapshot(values=values, time=time, grid=g)
