"""End-to-end pipeline: checkpoints, time mappings, inference, correction,
and the error metrics.

Training selects equispaced checkpoints, solves one transport problem per
sign per interval, fits the requested time-to-alpha mapping, and optionally
learns a POD/GPR corrector on the interpolation residuals.  A trained model
is immutable; inference reuses the precomputed plans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    EmptyDictionary,
    InvalidCounts,
    NoCorrector,
    TimeOutOfDomain,
    TooFewSnapshots,
    ZeroReferenceNorm,
)
from .gpr import GPRModel, gpr_fit, gpr_predict, make_gpr
from .interpolation import (
    InterpolationModel,
    SyntheticMatrix,
    build_interpolation_model,
    generate_synthetic_matrix,
    synth_snapshot,
)
from .measure import Grid, Snapshot, Trajectory
from .pod import PODBasis, compute_pod
from .transport import SinkhornOptions

__all__ = [
    "CheckpointSet",
    "TimeAlphaMapping",
    "ResidualCorrector",
    "RomModel",
    "ErrorReport",
    "select_checkpoints",
    "n_synth_for_total",
    "linear_map_time",
    "minl2_dictionary_argmin",
    "fit_minl2_mapping",
    "fit_linear_mapping",
    "train",
    "error_metrics",
    "relative_l2",
]

_TIME_SLACK = 1e-9


@dataclass(frozen=True)
class CheckpointSet:
    """Strictly increasing snapshot indices, endpoints included."""

    indices: np.ndarray
    snapshots: tuple[Snapshot, ...]

    @property
    def n_checkpoints(self) -> int:
        return self.indices.size

    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])


def select_checkpoints(traj: Trajectory, n_c: int) -> CheckpointSet:
    """Rounded equispaced subdivision of [0, N_T-1], half away from zero."""
    n_t = len(traj)
    if not 2 <= n_c <= n_t:
        raise InvalidCounts(f"need 2 <= N_c <= N_T, got N_c={n_c}, N_T={n_t}")
    positions = np.arange(n_c) * (n_t - 1) / (n_c - 1)
    indices = np.floor(positions + 0.5).astype(np.int64)  # half away from zero
    if np.any(np.diff(indices) <= 0):
        raise TooFewSnapshots(
            f"rounding produced duplicate checkpoint indices for N_c={n_c}, N_T={n_t}"
        )
    return CheckpointSet(
        indices=indices,
        snapshots=tuple(traj.snapshots[i] for i in indices),
    )


def n_synth_for_total(n_tot: int, n_c: int) -> int:
    """Interior snapshots per interval so the dictionary totals about n_tot."""
    if n_c < 2 or n_tot < n_c:
        raise InvalidCounts(f"need N_tot >= N_c >= 2, got N_tot={n_tot}, N_c={n_c}")
    return (n_tot - n_c) // (n_c - 1)


def linear_map_time(t: float, t_f: float, n_c: int) -> tuple[int, float]:
    """Uniform-interval mapping: i = floor(t/dt_c) clamped, alpha linear."""
    if not -_TIME_SLACK * max(1.0, t_f) <= t <= t_f * (1 + _TIME_SLACK):
        raise TimeOutOfDomain(f"t={t} outside [0, {t_f}]")
    dt_c = t_f / (n_c - 1)
    i = min(int(t // dt_c), n_c - 2)
    alpha = (t - i * dt_c) / dt_c
    return i, min(max(alpha, 0.0), 1.0)


class _PiecewiseLinear:
    """Interpolating regressor for the MinL2 escape hatch."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class TimeAlphaMapping:
    """Physical time to (interval index, local alpha).

    The linear variant interpolates between the actual checkpoint times, so
    checkpoints map exactly to interval endpoints even when index rounding
    makes them slightly non-equispaced.  The MinL2 variant regresses the
    global alpha fitted from the dictionary argmin.
    """

    kind: str
    checkpoint_times: np.ndarray
    t_f: float
    regressor: object | None = None
    train_times: np.ndarray | None = None
    train_alpha: np.ndarray | None = None

    @property
    def n_checkpoints(self) -> int:
        return self.checkpoint_times.size

    def alpha_global(self, t: float) -> float:
        """Overall progress through the simulation at time t, in [0, 1]."""
        i, a = self.map_time(t)
        return (i + a) / (self.n_checkpoints - 1)

    def map_time(self, t: float) -> tuple[int, float]:
        if not -_TIME_SLACK * max(1.0, self.t_f) <= t <= self.t_f * (1 + _TIME_SLACK):
            raise TimeOutOfDomain(f"t={t} outside [0, {self.t_f}]")
        n_c = self.n_checkpoints
        if self.kind == "linear":
            times = self.checkpoint_times
            i = int(np.searchsorted(times, t, side="right") - 1)
            i = min(max(i, 0), n_c - 2)
            alpha = (t - times[i]) / (times[i + 1] - times[i])
            return i, min(max(alpha, 0.0), 1.0)
        if isinstance(self.regressor, GPRModel):
            a_glob, _ = gpr_predict(self.regressor, t)
        else:
            a_glob = self.regressor(t)
        a_glob = min(max(float(a_glob), 0.0), 1.0)
        i = min(int(math.floor(a_glob * (n_c - 1))), n_c - 2)
        alpha = a_glob * (n_c - 1) - i
        return i, min(max(alpha, 0.0), 1.0)


def fit_linear_mapping(checkpoints: CheckpointSet, t_f: float) -> TimeAlphaMapping:
    return TimeAlphaMapping(kind="linear", checkpoint_times=checkpoints.times(),
                            t_f=t_f)


def minl2_dictionary_argmin(synth: SyntheticMatrix, snapshot_matrix: np.ndarray):
    """Closest dictionary column per snapshot, first (lexicographic) on ties.

    Returns (column indices, squared L2 residuals).
    """
    if synth.n_columns == 0:
        raise EmptyDictionary("synthetic dictionary has no columns")
    d = synth.data
    # ||u - d_j||^2 for all pairs without forming the full difference tensor
    cross = snapshot_matrix.T @ d
    sq = (snapshot_matrix ** 2).sum(axis=0)[:, None] \
        + (d ** 2).sum(axis=0)[None, :] - 2.0 * cross
    sq = np.maximum(sq, 0.0)
    idx = sq.argmin(axis=1)
    return idx, sq[np.arange(sq.shape[0]), idx]


def fit_minl2_mapping(model: InterpolationModel, traj: Trajectory,
                      n_synth: int, regressor: str = "gpr") -> TimeAlphaMapping:
    """Dictionary-argmin alphas per training time plus a 1D regression."""
    synth = generate_synthetic_matrix(model, n_synth)
    idx, _ = minl2_dictionary_argmin(synth, traj.matrix())
    alphas = synth.alphas_global[idx]
    times = traj.times()
    if regressor == "gpr":
        reg = gpr_fit(times / max(traj.t_f, 1e-300), alphas)
        reg = _ScaledGpr(reg, max(traj.t_f, 1e-300))
    elif regressor == "pwlinear":
        reg = _PiecewiseLinear(times, alphas)
    else:
        raise ValueError(f"unknown minl2 regressor {regressor!r}")
    checkpoint_times = np.array([s.time for s in model.checkpoints])
    return TimeAlphaMapping(
        kind="minl2", checkpoint_times=checkpoint_times, t_f=traj.t_f,
        regressor=reg, train_times=times, train_alpha=alphas,
    )


class _ScaledGpr:
    """GPR regressor over inputs rescaled to [0, 1]."""

    def __init__(self, model: GPRModel, scale: float):
        self.model = model
        self.scale = scale

    def __call__(self, t: float) -> float:
        mean, _ = gpr_predict(self.model, t / self.scale)
        return mean


@dataclass(frozen=True)
class ResidualCorrector:
    """POD basis of training residuals plus one GPR per retained coefficient.

    Inputs are times scaled to [0, 1]; targets are standardized per
    coefficient.  An empty basis (zero residuals) yields a zero correction.
    """

    basis: PODBasis
    regressors: tuple[GPRModel, ...]
    coeff_means: np.ndarray
    coeff_stds: np.ndarray
    t_scale: float

    def __post_init__(self):
        if self.basis.n_modes != len(self.regressors):
            raise ValueError("one regressor per retained mode required")

    def coefficients(self, t: float) -> np.ndarray:
        out = np.empty(len(self.regressors))
        for r, reg in enumerate(self.regressors):
            mean, _ = gpr_predict(reg, t / self.t_scale)
            out[r] = self.coeff_means[r] + self.coeff_stds[r] * mean
        return out

    def correction(self, t: float) -> np.ndarray:
        if self.basis.n_modes == 0:
            return np.zeros(self.basis.modes.shape[0])
        return self.basis.modes @ self.coefficients(t)


def _fit_corrector(interp: InterpolationModel, mapping: TimeAlphaMapping,
                   traj: Trajectory, pod_threshold: float) -> ResidualCorrector:
    residuals = np.empty((traj.grid.n_cells, len(traj)))
    for k, s in enumerate(traj.snapshots):
        i, a = mapping.map_time(s.time)
        residuals[:, k] = s.values - synth_snapshot(interp, i, a).values
    basis = compute_pod(residuals, threshold=pod_threshold)
    times = traj.times() / max(traj.t_f, 1e-300)
    coeffs = basis.modes.T @ residuals  # (N_r, N_T)
    regs = []
    means = np.zeros(basis.n_modes)
    stds = np.ones(basis.n_modes)
    for r in range(basis.n_modes):
        y = coeffs[r]
        means[r] = y.mean()
        std = y.std()
        stds[r] = std if std > 1e-300 else 1.0
        regs.append(gpr_fit(times, (y - means[r]) / stds[r]))
    return ResidualCorrector(basis=basis, regressors=tuple(regs),
                             coeff_means=means, coeff_stds=stds,
                             t_scale=max(traj.t_f, 1e-300))


@dataclass(frozen=True)
class RomModel:
    """Trained model; all components immutable, inference is pure."""

    checkpoints: CheckpointSet
    interpolation: InterpolationModel
    mapping: TimeAlphaMapping
    corrector: ResidualCorrector | None
    grid: Grid
    t_f: float
    provenance: dict = field(default_factory=dict)
    # wall-clock seconds per training step; diagnostic only, never persisted
    timings: dict = field(default_factory=dict, compare=False, repr=False)

    def infer(self, t: float) -> Snapshot:
        """u_synth at the mapped (interval, alpha); plans are reused as-is."""
        i, a = self.mapping.map_time(t)
        snap = synth_snapshot(self.interpolation, i, a)
        return Snapshot(values=snap.values, time=t, grid=self.grid)

    def infer_corrected(self, t: float) -> Snapshot:
        if self.corrector is None:
            raise NoCorrector("model was trained without correction")
        base = self.infer(t)
        return Snapshot(values=base.values + self.corrector.correction(t),
                        time=t, grid=self.grid)


def train(traj: Trajectory, n_checkpoints: int,
          sinkhorn_opts: SinkhornOptions | None = None,
          mapping: str = "linear", correction: bool = False,
          n_synth: int | None = None, pod_threshold: float = 0.9999,
          sign_strategy: str = "split", minl2_regressor: str = "gpr",
          cost_exponent: int = 2, max_workers: int = 1) -> RomModel:
    """Offline stage: checkpoints, per-interval plans, mapping, corrector.

    n_synth sizes the MinL2 dictionary (default: as dense as the training
    set).  Transport, POD, and GPR failures propagate with interval context.
    """
    if mapping not in ("linear", "minl2"):
        raise ValueError(f"unknown mapping {mapping!r}")
    from time import perf_counter

    opts = sinkhorn_opts or SinkhornOptions()
    t0 = perf_counter()
    checkpoints = select_checkpoints(traj, n_checkpoints)
    interp = build_interpolation_model(
        checkpoints.snapshots, opts=opts, p=cost_exponent,
        sign_strategy=sign_strategy, max_workers=max_workers,
    )
    t1 = perf_counter()
    if mapping == "linear":
        time_map = fit_linear_mapping(checkpoints, traj.t_f)
    else:
        if n_synth is None:
            n_synth = n_synth_for_total(len(traj), n_checkpoints)
        time_map = fit_minl2_mapping(interp, traj, n_synth,
                                     regressor=minl2_regressor)
    t2 = perf_counter()
    corrector = None
    if correction:
        corrector = _fit_corrector(interp, time_map, traj, pod_threshold)
    t3 = perf_counter()
    timings = {"plans": t1 - t0, "mapping": t2 - t1, "correction": t3 - t2,
               "total": t3 - t0}
    provenance = {
        "epsilon": opts.epsilon,
        "marginal_tol": opts.marginal_tol,
        "eps_scaling_factor": opts.eps_scaling_factor,
        "eps_start_multiplier": opts.eps_start_multiplier,
        "max_iters": opts.max_iters,
        "mapping": mapping,
        "minl2_regressor": minl2_regressor,
        "n_synth": n_synth,
        "pod_threshold": pod_threshold,
        "sign_strategy": sign_strategy,
        "cost_exponent": cost_exponent,
    }
    return RomModel(checkpoints=checkpoints, interpolation=interp,
                    mapping=time_map, corrector=corrector, grid=traj.grid,
                    t_f=traj.t_f, provenance=provenance, timings=timings)


# --- error metrics ------------------------------------------------------------

_ERROR_KINDS = ("disc", "interp", "gen", "proj")


@dataclass(frozen=True)
class ErrorReport:
    """Per-time relative L2 errors with their arithmetic mean."""

    times: np.ndarray
    errors: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in _ERROR_KINDS:
            raise ValueError(f"unknown error kind {self.kind!r}")
        if np.any(np.asarray(self.errors) < 0):
            raise ValueError("errors must be nonnegative")

    def mean(self) -> float:
        return float(np.mean(self.errors))


def relative_l2(u_ref: np.ndarray, u_hat: np.ndarray) -> float:
    ref_norm = np.linalg.norm(u_ref)
    if ref_norm == 0:
        raise ZeroReferenceNorm("reference snapshot has zero norm")
    return float(np.linalg.norm(u_ref - u_hat) / ref_norm)


def _snapshot_at(traj: Trajectory, t: float) -> np.ndarray:
    k = int(round(t / traj.dt))
    if not 0 <= k < len(traj) or abs(traj.snapshots[k].time - t) > \
            _TIME_SLACK * max(1.0, traj.t_f):
        raise ValueError(f"t={t} is not on the trajectory's save lattice")
    return traj.snapshots[k].values


def error_metrics(kind: str, reference: Trajectory,
                  candidate: Trajectory | Callable[[float], Snapshot],
                  times) -> ErrorReport:
    """Relative L2 error of candidate vs reference at each time."""
    times = np.asarray(times, dtype=np.float64)
    if callable(candidate):
        candidate_at = lambda t: candidate(t).values
    else:
        candidate_at = lambda t: _snapshot_at(candidate, t)
    errors = np.array([
        relative_l2(_snapshot_at(reference, t), candidate_at(t)) for t in times
    ])
    return ErrorReport(times=times, errors=errors, kind=kind)
