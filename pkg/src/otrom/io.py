"""Bit-exact persistence: trajectories, plans, model directories, CSV export.

Binary layouts are little-endian with explicit magic/version headers.  A
model is a directory holding a JSON manifest plus npy/otpl payload files;
re-saving a loaded model reproduces every byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    IoError,
    MissingArtifact,
    TruncatedFile,
    VersionMismatch,
)
from .gpr import GPRModel, make_gpr
from .interpolation import IntervalModel, InterpolationModel, SignPartModel
from .measure import Grid, Snapshot, Trajectory
from .pod import PODBasis
from .rom import (
    CheckpointSet,
    ResidualCorrector,
    RomModel,
    TimeAlphaMapping,
    _PiecewiseLinear,
    _ScaledGpr,
)
from .transport import TransportPlan

__all__ = [
    "save_trajectory",
    "load_trajectory",
    "save_plan",
    "load_plan",
    "save_rom_model",
    "load_rom_model",
    "export_error_report_csv",
]

_TRAJ_MAGIC = b"OTRM"
_PLAN_MAGIC = b"OTPL"
_VERSION = 1
_TRAJ_HEADER = struct.Struct("<4sIIIddddIdd")
_PLAN_HEADER = struct.Struct("<4sIIIBdQdQ")


def _read_exact(fh, size: int, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise TruncatedFile(f"{what}: expected {size} bytes, got {len(data)}")
    return data


def save_trajectory(traj: Trajectory, path) -> None:
    g = traj.grid
    header = _TRAJ_HEADER.pack(
        _TRAJ_MAGIC, _VERSION, g.nx, g.nz, g.hx, g.hz,
        g.origin[0], g.origin[1], len(traj), traj.dt, traj.t_f,
    )
    payload = np.ascontiguousarray(traj.matrix().T, dtype="<f8")  # time-major
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.tobytes())
    except OSError as e:
        raise IoError(str(e)) from e


def load_trajectory(path) -> Trajectory:
    try:
        with open(path, "rb") as fh:
            raw = _read_exact(fh, _TRAJ_HEADER.size, "trajectory header")
            magic, version, nx, nz, hx, hz, x0, z0, n_t, dt, t_f = \
                _TRAJ_HEADER.unpack(raw)
            if magic != _TRAJ_MAGIC:
                raise BadMagic(f"expected {_TRAJ_MAGIC!r}, found {magic!r}")
            if version != _VERSION:
                raise VersionMismatch(f"trajectory format v{version} unsupported")
            n_h = nx * nz
            data = _read_exact(fh, 8 * n_t * n_h, "trajectory payload")
    except OSError as e:
        raise IoError(str(e)) from e
    values = np.frombuffer(data, dtype="<f8").reshape(n_t, n_h)
    grid = Grid(nx=nx, nz=nz, hx=hx, hz=hz, origin=(x0, z0))
    snaps = tuple(
        Snapshot(values=values[k].copy(), time=k * dt, grid=grid)
        for k in range(n_t)
    )
    return Trajectory(snapshots=snaps, dt=dt, t_f=t_f)


def save_plan(plan: TransportPlan, path) -> None:
    n, m = plan.shape
    dense_flag = 0 if plan.is_sparse else 1
    nnz = plan.nnz
    header = _PLAN_HEADER.pack(
        _PLAN_MAGIC, _VERSION, n, m, dense_flag, plan.epsilon_used,
        plan.iterations, plan.marginal_violation, nnz,
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            if dense_flag:
                fh.write(np.ascontiguousarray(plan.dense, dtype="<f8").tobytes())
            else:
                fh.write(np.ascontiguousarray(plan.rows, dtype="<i8").tobytes())
                fh.write(np.ascontiguousarray(plan.cols, dtype="<i8").tobytes())
                fh.write(np.ascontiguousarray(plan.vals, dtype="<f8").tobytes())
    except OSError as e:
        raise IoError(str(e)) from e


def load_plan(path) -> TransportPlan:
    try:
        with open(path, "rb") as fh:
            raw = _read_exact(fh, _PLAN_HEADER.size, "plan header")
            magic, version, n, m, dense_flag, eps, iters, viol, nnz = \
                _PLAN_HEADER.unpack(raw)
            if magic != _PLAN_MAGIC:
                raise BadMagic(f"expected {_PLAN_MAGIC!r}, found {magic!r}")
            if version != _VERSION:
                raise VersionMismatch(f"plan format v{version} unsupported")
            if dense_flag:
                data = _read_exact(fh, 8 * n * m, "plan payload")
                dense = np.frombuffer(data, dtype="<f8").reshape(n, m).copy()
                return TransportPlan(shape=(n, m), epsilon_used=eps,
                                     iterations=iters, marginal_violation=viol,
                                     dense=dense)
            rows = np.frombuffer(_read_exact(fh, 8 * nnz, "plan rows"),
                                 dtype="<i8").copy()
            cols = np.frombuffer(_read_exact(fh, 8 * nnz, "plan cols"),
                                 dtype="<i8").copy()
            vals = np.frombuffer(_read_exact(fh, 8 * nnz, "plan vals"),
                                 dtype="<f8").copy()
    except OSError as e:
        raise IoError(str(e)) from e
    return TransportPlan(shape=(n, m), epsilon_used=eps, iterations=iters,
                         marginal_violation=viol, rows=rows, cols=cols,
                         vals=vals)


# --- model directory ------------------------------------------------------------


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifact(f"missing model file {path}")
    return path


def save_rom_model(model: RomModel, dirpath) -> None:
    """Persist a trained model as manifest + per-interval plan files."""
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    g = model.grid
    manifest = {
        "format": "otrom-rom",
        "version": _VERSION,
        "grid": {"nx": g.nx, "nz": g.nz, "hx": g.hx, "hz": g.hz,
                 "x0": g.origin[0], "z0": g.origin[1]},
        "t_f": model.t_f,
        "checkpoint_indices": [int(i) for i in model.checkpoints.indices],
        "checkpoint_times": [float(t) for t in model.checkpoints.times()],
        "mapping_kind": model.mapping.kind,
        "correction": model.corrector is not None,
        "provenance": model.provenance,
        "intervals": [],
    }
    np.save(d / "checkpoints.npy",
            np.column_stack([s.values for s in model.checkpoints.snapshots]))
    for i, interval in enumerate(model.interpolation.intervals):
        entry = {"t_left": interval.t_left, "t_right": interval.t_right}
        for sign in ("pos", "neg"):
            part: SignPartModel | None = getattr(interval, sign)
            if part is None:
                entry[sign] = None
                continue
            entry[sign] = {"mass_left": part.mass_left,
                           "mass_right": part.mass_right}
            save_plan(part.plan, d / f"plan_{i:03d}_{sign}.otpl")
            np.savez(d / f"support_{i:03d}_{sign}.npz",
                     src_xy=part.src_coords, dst_xy=part.dst_coords)
        manifest["intervals"].append(entry)

    if model.mapping.kind == "minl2":
        reg = model.mapping.regressor
        if isinstance(reg, _ScaledGpr):
            np.savez(d / "mapping.npz",
                     kind=np.array("gpr"),
                     train_times=model.mapping.train_times,
                     train_alpha=model.mapping.train_alpha,
                     x=reg.model.train_x, y=reg.model.train_y,
                     params=np.array([reg.model.sigma_f2,
                                      reg.model.length_scale,
                                      reg.model.noise,
                                      reg.model.mean_const, reg.scale]))
        else:
            np.savez(d / "mapping.npz",
                     kind=np.array("pwlinear"),
                     train_times=model.mapping.train_times,
                     train_alpha=model.mapping.train_alpha)

    if model.corrector is not None:
        c = model.corrector
        np.save(d / "residual_modes.npy", c.basis.modes)
        np.save(d / "residual_sv.npy", c.basis.singular_values)
        if c.regressors:
            params = np.array([[r.sigma_f2, r.length_scale, r.noise, r.mean_const]
                               for r in c.regressors])
            ys = np.array([r.train_y for r in c.regressors])
            xs = c.regressors[0].train_x
        else:
            params = np.zeros((0, 4))
            ys = np.zeros((0, 0))
            xs = np.zeros(0)
        np.savez(d / "corrector.npz", coeff_means=c.coeff_means,
                 coeff_stds=c.coeff_stds, t_scale=np.array(c.t_scale),
                 x=xs, ys=ys, params=params,
                 pod_threshold=np.array(c.basis.energy_threshold or 0.0))
    _write_json(d / "manifest.json", manifest)


def load_rom_model(dirpath) -> RomModel:
    d = Path(dirpath)
    manifest = json.loads(_require(d / "manifest.json").read_text())
    if manifest.get("format") != "otrom-rom":
        raise BadMagic(f"{d} is not an otrom model directory")
    if manifest.get("version") != _VERSION:
        raise VersionMismatch(f"model format v{manifest.get('version')} unsupported")
    gdict = manifest["grid"]
    grid = Grid(nx=gdict["nx"], nz=gdict["nz"], hx=gdict["hx"], hz=gdict["hz"],
                origin=(gdict["x0"], gdict["z0"]))
    checkpoint_values = np.load(_require(d / "checkpoints.npy"))
    times = manifest["checkpoint_times"]
    snaps = tuple(
        Snapshot(values=checkpoint_values[:, k], time=times[k], grid=grid)
        for k in range(len(times))
    )
    checkpoints = CheckpointSet(
        indices=np.array(manifest["checkpoint_indices"], dtype=np.int64),
        snapshots=snaps,
    )
    intervals = []
    for i, entry in enumerate(manifest["intervals"]):
        parts = {}
        for sign in ("pos", "neg"):
            if entry[sign] is None:
                parts[sign] = None
                continue
            plan = load_plan(_require(d / f"plan_{i:03d}_{sign}.otpl"))
            with np.load(_require(d / f"support_{i:03d}_{sign}.npz")) as sup:
                src_xy = sup["src_xy"]
                dst_xy = sup["dst_xy"]
            parts[sign] = SignPartModel(
                plan=plan, src_coords=src_xy, dst_coords=dst_xy,
                mass_left=entry[sign]["mass_left"],
                mass_right=entry[sign]["mass_right"],
            )
        intervals.append(IntervalModel(pos=parts["pos"], neg=parts["neg"],
                                       t_left=entry["t_left"],
                                       t_right=entry["t_right"]))
    interp = InterpolationModel(intervals=tuple(intervals), checkpoints=snaps,
                                grid=grid)

    t_f = manifest["t_f"]
    if manifest["mapping_kind"] == "linear":
        mapping = TimeAlphaMapping(kind="linear",
                                   checkpoint_times=np.array(times), t_f=t_f)
    else:
        with np.load(_require(d / "mapping.npz")) as mz:
            kind = str(mz["kind"])
            train_times = mz["train_times"]
            train_alpha = mz["train_alpha"]
            if kind == "gpr":
                p = mz["params"]
                gpr = make_gpr(mz["x"], mz["y"], p[0], p[1], p[2],
                               mean_const=p[3])
                reg = _ScaledGpr(gpr, float(p[4]))
            else:
                reg = _PiecewiseLinear(train_times, train_alpha)
        mapping = TimeAlphaMapping(kind="minl2",
                                   checkpoint_times=np.array(times), t_f=t_f,
                                   regressor=reg, train_times=train_times,
                                   train_alpha=train_alpha)

    corrector = None
    if manifest["correction"]:
        modes = np.load(_require(d / "residual_modes.npy"))
        sv = np.load(_require(d / "residual_sv.npy"))
        with np.load(_require(d / "corrector.npz")) as cz:
            basis = PODBasis(modes=modes, singular_values=sv,
                             energy_threshold=float(cz["pod_threshold"]) or None)
            regs = tuple(
                make_gpr(cz["x"], cz["ys"][r], *cz["params"][r][:3],
                         mean_const=cz["params"][r][3])
                for r in range(cz["params"].shape[0])
            )
            corrector = ResidualCorrector(
                basis=basis, regressors=regs, coeff_means=cz["coeff_means"],
                coeff_stds=cz["coeff_stds"], t_scale=float(cz["t_scale"]),
            )
    return RomModel(checkpoints=checkpoints, interpolation=interp,
                    mapping=mapping, corrector=corrector, grid=grid, t_f=t_f,
                    provenance=manifest["provenance"])


def export_error_report_csv(report, path) -> None:
    """CSV with one row per time and a trailing mean row, 17 significant digits."""
    if len(report.errors) == 0:
        raise ValueError("refusing to export an empty error report")
    lines = ["time,error,kind"]
    for t, e in zip(report.times, report.errors):
        lines.append(f"{t:.17g},{e:.17g},{report.kind}")
    lines.append(f"mean,{report.mean():.17g},{report.kind}")
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(str(e)) from e
