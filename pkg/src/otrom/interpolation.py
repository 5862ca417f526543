"""Displacement interpolation of measure pairs and snapshot synthesis.

Each checkpoint interval carries one precomputed transport plan per sign
part.  Evaluating the interpolant moves plan mass along straight lines
between paired support points, projects the displaced atoms onto the grid,
and scales the result by the linearly interpolated endpoint mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import IntervalOutOfRange, InvalidAlpha, InvalidFieldSign
from .measure import (
    DiscreteMeasure,
    Grid,
    Snapshot,
    field_to_measures,
)
from .transport import SinkhornOptions, TransportPlan, build_cost_matrix, sinkhorn

__all__ = [
    "SignPartModel",
    "IntervalModel",
    "InterpolationModel",
    "SyntheticMatrix",
    "displacement_interpolate",
    "build_interval_model",
    "build_interpolation_model",
    "sign_part_interpolant",
    "synth_snapshot",
    "generate_synthetic_matrix",
]


@dataclass(frozen=True)
class SignPartModel:
    """Transport plan and endpoint masses for one sign of the field.

    Under a sign mismatch one endpoint mass is zero and the measure on that
    side is uniform over the other snapshot's support, so the part fades
    linearly while its mass moves somewhere sensible.
    """

    plan: TransportPlan
    src_coords: np.ndarray
    dst_coords: np.ndarray
    mass_left: float
    mass_right: float


@dataclass(frozen=True)
class IntervalModel:
    """Plans for one pair of consecutive checkpoints."""

    pos: SignPartModel | None
    neg: SignPartModel | None
    t_left: float
    t_right: float

    def __post_init__(self):
        if self.pos is None and self.neg is None:
            raise ValueError("interval carries no sign part")


@dataclass(frozen=True)
class InterpolationModel:
    """All interval models plus the checkpoints they connect."""

    intervals: tuple[IntervalModel, ...]
    checkpoints: tuple[Snapshot, ...]
    grid: Grid

    def __post_init__(self):
        if len(self.intervals) != len(self.checkpoints) - 1:
            raise ValueError("need exactly one interval per checkpoint pair")

    @property
    def n_checkpoints(self) -> int:
        return len(self.checkpoints)


def displacement_interpolate(P: TransportPlan, src_pts: np.ndarray,
                             dst_pts: np.ndarray, alpha: float,
                             grid: Grid) -> DiscreteMeasure:
    """McCann interpolation of a coupling, projected onto the grid.

    Atoms at (1-alpha)*x_i + alpha*y_j weighted by the plan entries are
    snapped to the nearest cell centers; coincident atoms merge by weight
    summation.  Weights are renormalized by the plan's total mass so the
    result is a valid probability measure; that total (1 within the solver's
    marginal tolerance) is recorded as the measure's mass.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidAlpha(f"alpha={alpha} outside [0, 1]")
    x0, z0 = grid.origin
    if P.is_sparse:
        field = kernels.scatter_plan_triplets(
            P.rows, P.cols, P.vals, src_pts, dst_pts, alpha,
            x0, z0, grid.hx, grid.hz, grid.nx, grid.nz,
        )
    else:
        field = kernels.scatter_plan_dense(
            P.dense, src_pts, dst_pts, alpha,
            x0, z0, grid.hx, grid.hz, grid.nx, grid.nz,
        )
    total = float(field.sum())
    support = np.nonzero(field)[0]
    return DiscreteMeasure(support=support, weights=field[support] / total,
                           mass=total)


def _uniform_on_field_support(values: np.ndarray) -> DiscreteMeasure:
    support = np.nonzero(values)[0]
    n = support.size
    return DiscreteMeasure(support=support, weights=np.full(n, 1.0 / n), mass=1.0)


def build_interval_model(left: Snapshot, right: Snapshot,
                         opts: SinkhornOptions | None = None, p: int = 2,
                         sign_strategy: str = "split") -> IntervalModel:
    """Solve the per-sign transport problems for one checkpoint pair."""
    if sign_strategy not in ("split", "nonnegative"):
        raise ValueError(f"unknown sign_strategy {sign_strategy!r}")
    grid = left.grid
    dec_l = field_to_measures(left)
    dec_r = field_to_measures(right)
    if sign_strategy == "nonnegative" and (dec_l.negative or dec_r.negative):
        raise InvalidFieldSign(
            "sign_strategy 'nonnegative' but a snapshot has negative values"
        )

    parts = {}
    for sign in ("pos", "neg"):
        mu = dec_l.positive if sign == "pos" else dec_l.negative
        nu = dec_r.positive if sign == "pos" else dec_r.negative
        if mu is None and nu is None:
            parts[sign] = None
            continue
        mass_left = mu.mass if mu is not None else 0.0
        mass_right = nu.mass if nu is not None else 0.0
        if mu is None:
            mu = _uniform_on_field_support(left.values)
        if nu is None:
            nu = _uniform_on_field_support(right.values)
        C = build_cost_matrix(mu, nu, grid, p=p)
        plan = sinkhorn(mu.weights, nu.weights, C, opts)
        parts[sign] = SignPartModel(
            plan=plan, src_coords=C.src_coords, dst_coords=C.dst_coords,
            mass_left=mass_left, mass_right=mass_right,
        )
    return IntervalModel(pos=parts["pos"], neg=parts["neg"],
                         t_left=left.time, t_right=right.time)


def build_interpolation_model(checkpoints, opts: SinkhornOptions | None = None,
                              p: int = 2, sign_strategy: str = "split",
                              max_workers: int = 1) -> InterpolationModel:
    """Build all interval models.

    Interval solves only read the shared checkpoint snapshots, so they can
    run concurrently; max_workers > 1 uses a thread pool (the solver kernels
    release the GIL).
    """
    checkpoints = tuple(checkpoints)
    pairs = list(zip(checkpoints[:-1], checkpoints[1:]))
    if max_workers > 1 and len(pairs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            intervals = list(pool.map(
                lambda lr: build_interval_model(lr[0], lr[1], opts, p, sign_strategy),
                pairs,
            ))
    else:
        intervals = [build_interval_model(s0, s1, opts, p, sign_strategy)
                     for s0, s1 in pairs]
    return InterpolationModel(intervals=tuple(intervals),
                              checkpoints=checkpoints,
                              grid=checkpoints[0].grid)


def sign_part_interpolant(part: SignPartModel, alpha: float,
                          grid: Grid) -> tuple[DiscreteMeasure, float]:
    """Interpolated measure of one sign part and its interpolated mass."""
    measure = displacement_interpolate(part.plan, part.src_coords,
                                       part.dst_coords, alpha, grid)
    mass = (1.0 - alpha) * part.mass_left + alpha * part.mass_right
    return measure, mass


def synth_snapshot(model: InterpolationModel, i: int, alpha: float) -> Snapshot:
    """Synthetic snapshot u_synth(i, alpha) on interval i."""
    if not 0 <= i <= len(model.intervals) - 1:
        raise IntervalOutOfRange(
            f"interval {i} outside [0, {len(model.intervals) - 1}]"
        )
    if not 0.0 <= alpha <= 1.0:
        raise InvalidAlpha(f"alpha={alpha} outside [0, 1]")
    interval = model.intervals[i]
    values = np.zeros(model.grid.n_cells)
    for part, sign in ((interval.pos, 1.0), (interval.neg, -1.0)):
        if part is None:
            continue
        measure, mass = sign_part_interpolant(part, alpha, model.grid)
        if mass != 0.0:
            values[measure.support] += sign * mass * measure.weights
    t = interval.t_left + alpha * (interval.t_right - interval.t_left)
    return Snapshot(values=values, time=t, grid=model.grid)


@dataclass(frozen=True)
class SyntheticMatrix:
    """Synthetic snapshot matrix with per-column interval labels.

    Columns are ordered checkpoint 0, its interior interpolants, checkpoint
    1, and so on; labels store (interval, j) with alpha_j = j/(n_synth+1),
    the final checkpoint being (N_c-2, n_synth+1).
    """

    data: np.ndarray
    labels: np.ndarray
    alphas_global: np.ndarray
    n_synth: int

    @property
    def n_columns(self) -> int:
        return self.data.shape[1]


def generate_synthetic_matrix(model: InterpolationModel,
                              n_synth: int) -> SyntheticMatrix:
    """Dictionary of checkpoints plus n_synth interpolants per interval."""
    if n_synth < 0:
        raise ValueError("n_synth must be >= 0")
    n_c = model.n_checkpoints
    columns = []
    labels = []
    for i in range(n_c - 1):
        columns.append(model.checkpoints[i].values)
        labels.append((i, 0))
        for j in range(1, n_synth + 1):
            alpha = j / (n_synth + 1)
            columns.append(synth_snapshot(model, i, alpha).values)
            labels.append((i, j))
    columns.append(model.checkpoints[-1].values)
    labels.append((n_c - 2, n_synth + 1))
    labels = np.array(labels, dtype=np.int64)
    alphas = (labels[:, 0] + labels[:, 1] / (n_synth + 1)) / (n_c - 1)
    return SyntheticMatrix(data=np.column_stack(columns), labels=labels,
                           alphas_global=alphas, n_synth=n_synth)
