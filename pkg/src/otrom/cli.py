"""Config-driven command-line front end.

Commands: generate -> train -> infer/evaluate/sweep.  Each consumes one YAML
config (schema-validated, unknown keys rejected) and communicates results as
files under paths.work_dir plus CSV tables.  Exit codes: 0 ok, 2 config
error, 3 missing artifact, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from time import perf_counter

import numpy as np
import yaml

from . import io as otio
from . import rom as romlib
from .errors import (
    CflViolation,
    CholeskyFailure,
    ConfigInvalid,
    IoError,
    MissingArtifact,
    NotConverged,
    NumericalOverflow,
    OtromError,
)
from .fomgen import BlobSpec, ConstantVelocity, FomConfig, RigidRotation, simulate
from .interpolation import generate_synthetic_matrix
from .pod import compute_pod, projection_error
from .transport import SinkhornOptions

__all__ = ["main", "load_config", "RunConfig"]


@dataclass(frozen=True)
class RomSettings:
    n_checkpoints: int
    n_total_synthetic: int
    epsilon: float | None
    marginal_tol: float
    mapping: str
    minl2_regressor: str
    correction: bool
    pod_threshold: float
    sign_strategy: str

    def sinkhorn_options(self) -> SinkhornOptions:
        return SinkhornOptions(epsilon=self.epsilon,
                               marginal_tol=self.marginal_tol)


@dataclass(frozen=True)
class RunConfig:
    fom: FomConfig
    ref_refine: int
    rom: RomSettings
    test_time_offsets: tuple[float, ...]
    work_dir: Path


def _type_name(v) -> str:
    return type(v).__name__


def _section(raw: dict, name: str, allowed: set[str], required: set[str]) -> dict:
    if name not in raw:
        raise ConfigInvalid(f"missing section '{name}'")
    sec = raw[name]
    if not isinstance(sec, dict):
        raise ConfigInvalid(f"section '{name}' must be a mapping")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigInvalid(f"unknown keys in '{name}': {sorted(unknown)}")
    missing = required - set(sec)
    if missing:
        raise ConfigInvalid(f"missing keys in '{name}': {sorted(missing)}")
    return sec


def _number(sec: dict, section: str, key: str, default=None, minimum=None,
            maximum=None, integer=False, allow_none=False):
    if key not in sec:
        return default
    v = sec[key]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigInvalid(f"{section}.{key} must be a number, got {_type_name(v)}")
    if integer and int(v) != v:
        raise ConfigInvalid(f"{section}.{key} must be an integer, got {v}")
    if minimum is not None and v < minimum:
        raise ConfigInvalid(f"{section}.{key} must be >= {minimum}, got {v}")
    if maximum is not None and v > maximum:
        raise ConfigInvalid(f"{section}.{key} must be <= {maximum}, got {v}")
    return int(v) if integer else float(v)


def _choice(sec: dict, section: str, key: str, choices: tuple, default=None):
    v = sec.get(key, default)
    if v not in choices:
        raise ConfigInvalid(f"{section}.{key} must be one of {choices}, got {v!r}")
    return v


def _parse_velocity(raw) -> ConstantVelocity | RigidRotation:
    if not isinstance(raw, dict):
        raise ConfigInvalid("fom.velocity must be a mapping")
    kind = raw.get("kind")
    if kind == "constant":
        allowed = {"kind", "vx", "vz"}
        if set(raw) - allowed:
            raise ConfigInvalid(f"unknown keys in fom.velocity: {sorted(set(raw) - allowed)}")
        return ConstantVelocity(vx=_number(raw, "fom.velocity", "vx", 0.0),
                                vz=_number(raw, "fom.velocity", "vz", 0.0))
    if kind == "rotation":
        allowed = {"kind", "cx", "cz", "omega"}
        if set(raw) - allowed:
            raise ConfigInvalid(f"unknown keys in fom.velocity: {sorted(set(raw) - allowed)}")
        return RigidRotation(cx=_number(raw, "fom.velocity", "cx", 0.0),
                             cz=_number(raw, "fom.velocity", "cz", 0.0),
                             omega=_number(raw, "fom.velocity", "omega", 0.0))
    raise ConfigInvalid(f"fom.velocity.kind must be constant or rotation, got {kind!r}")


def _parse_blob(raw) -> BlobSpec:
    if not isinstance(raw, dict):
        raise ConfigInvalid("fom.blob must be a mapping")
    allowed = {"x", "z", "sigma", "amplitude", "cutoff"}
    if set(raw) - allowed:
        raise ConfigInvalid(f"unknown keys in fom.blob: {sorted(set(raw) - allowed)}")
    return BlobSpec(
        x=_number(raw, "fom.blob", "x", 0.0),
        z=_number(raw, "fom.blob", "z", 0.0),
        sigma=_number(raw, "fom.blob", "sigma", minimum=1e-300),
        amplitude=_number(raw, "fom.blob", "amplitude", 1.0),
        cutoff=_number(raw, "fom.blob", "cutoff", None, minimum=0.0,
                       allow_none=True),
    )


def load_config(path) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigInvalid(f"config file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigInvalid(f"config is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigInvalid("config root must be a mapping")
    unknown = set(raw) - {"fom", "rom", "eval", "paths"}
    if unknown:
        raise ConfigInvalid(f"unknown top-level sections: {sorted(unknown)}")

    fom_sec = _section(raw, "fom", allowed={
        "nx", "nz", "hx", "hz", "x0", "z0", "velocity", "blob", "nu", "dt",
        "t_f", "save_stride", "ref_refine", "boundary",
    }, required={"nx", "nz", "velocity", "blob", "dt", "t_f"})
    if "sigma" not in fom_sec.get("blob", {}):
        raise ConfigInvalid("missing key fom.blob.sigma")
    try:
        fom = FomConfig(
            nx=_number(fom_sec, "fom", "nx", minimum=1, integer=True),
            nz=_number(fom_sec, "fom", "nz", minimum=1, integer=True),
            hx=_number(fom_sec, "fom", "hx", 1.0, minimum=1e-300),
            hz=_number(fom_sec, "fom", "hz", 1.0, minimum=1e-300),
            origin=(_number(fom_sec, "fom", "x0", 0.0),
                    _number(fom_sec, "fom", "z0", 0.0)),
            velocity=_parse_velocity(fom_sec["velocity"]),
            blob=_parse_blob(fom_sec["blob"]),
            nu=_number(fom_sec, "fom", "nu", 0.0, minimum=0.0),
            dt=_number(fom_sec, "fom", "dt", minimum=1e-300),
            t_f=_number(fom_sec, "fom", "t_f", minimum=1e-300),
            save_stride=_number(fom_sec, "fom", "save_stride", 1, minimum=1,
                                integer=True),
            boundary=_choice(fom_sec, "fom", "boundary",
                             ("periodic", "outflow"), "periodic"),
        )
    except (ValueError, CflViolation) as e:
        raise ConfigInvalid(f"fom: {e}") from e
    ref_refine = _number(fom_sec, "fom", "ref_refine", 4, minimum=1, integer=True)

    rom_sec = _section(raw, "rom", allowed={
        "n_checkpoints", "n_total_synthetic", "epsilon", "marginal_tol",
        "mapping", "minl2_regressor", "correction", "pod_threshold",
        "sign_strategy",
    }, required={"n_checkpoints", "n_total_synthetic"})
    correction = rom_sec.get("correction", False)
    if not isinstance(correction, bool):
        raise ConfigInvalid("rom.correction must be a boolean")
    rom = RomSettings(
        n_checkpoints=_number(rom_sec, "rom", "n_checkpoints", minimum=2,
                              integer=True),
        n_total_synthetic=_number(rom_sec, "rom", "n_total_synthetic",
                                  minimum=2, integer=True),
        epsilon=_number(rom_sec, "rom", "epsilon", None, minimum=1e-300,
                        allow_none=True),
        marginal_tol=_number(rom_sec, "rom", "marginal_tol", 1e-9,
                             minimum=1e-300),
        mapping=_choice(rom_sec, "rom", "mapping", ("linear", "minl2"),
                        "linear"),
        minl2_regressor=_choice(rom_sec, "rom", "minl2_regressor",
                                ("gpr", "pwlinear"), "gpr"),
        correction=correction,
        pod_threshold=_number(rom_sec, "rom", "pod_threshold", 0.9999,
                              minimum=1e-12, maximum=1.0),
        sign_strategy=_choice(rom_sec, "rom", "sign_strategy",
                              ("split", "nonnegative"), "split"),
    )

    eval_sec = _section(raw, "eval", allowed={"test_time_offsets"},
                        required=set()) if "eval" in raw else {}
    offsets = eval_sec.get("test_time_offsets", [0.5])
    if not isinstance(offsets, list) or not offsets:
        raise ConfigInvalid("eval.test_time_offsets must be a non-empty list")
    for o in offsets:
        if isinstance(o, bool) or not isinstance(o, (int, float)) or not 0 < o < 1:
            raise ConfigInvalid(f"test offset {o!r} must lie strictly in (0, 1)")
        quantum = o * fom.save_stride * ref_refine
        if abs(quantum - round(quantum)) > 1e-9:
            raise ConfigInvalid(
                f"test offset {o} does not land on the reference save lattice "
                f"(save_stride={fom.save_stride}, ref_refine={ref_refine})"
            )

    paths_sec = _section(raw, "paths", allowed={"work_dir"},
                         required={"work_dir"})
    work_dir = paths_sec["work_dir"]
    if not isinstance(work_dir, str) or not work_dir:
        raise ConfigInvalid("paths.work_dir must be a non-empty string")

    return RunConfig(fom=fom, ref_refine=ref_refine, rom=rom,
                     test_time_offsets=tuple(float(o) for o in offsets),
                     work_dir=Path(work_dir))


def _max_workers() -> int:
    raw = os.environ.get("OTROM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigInvalid(f"OTROM_THREADS must be an integer, got {raw!r}")


def _reference_config(cfg: RunConfig) -> FomConfig:
    f = cfg.fom
    return FomConfig(nx=f.nx, nz=f.nz, hx=f.hx, hz=f.hz, origin=f.origin,
                     velocity=f.velocity, blob=f.blob, nu=f.nu,
                     dt=f.dt / cfg.ref_refine, t_f=f.t_f, save_stride=1,
                     boundary=f.boundary)


def _train_path(cfg: RunConfig) -> Path:
    return cfg.work_dir / "train.otrm"


def _ref_path(cfg: RunConfig) -> Path:
    return cfg.work_dir / "reference.otrm"


def _model_dir(cfg: RunConfig) -> Path:
    return cfg.work_dir / "model"


def _load_artifact(path: Path):
    if not path.exists():
        raise MissingArtifact(f"missing artifact {path}; run earlier stages first")
    return otio.load_trajectory(path)


def cmd_generate(cfg: RunConfig) -> None:
    """Write the coarse training trajectory and the fine reference one."""
    cfg.work_dir.mkdir(parents=True, exist_ok=True)
    train_traj = simulate(cfg.fom)
    otio.save_trajectory(train_traj, _train_path(cfg))
    ref_traj = simulate(_reference_config(cfg))
    otio.save_trajectory(ref_traj, _ref_path(cfg))
    print(f"[otrom] wrote {_train_path(cfg)} ({len(train_traj)} snapshots, "
          f"dt_save={train_traj.dt:g})")
    print(f"[otrom] wrote {_ref_path(cfg)} ({len(ref_traj)} snapshots, "
          f"dt={ref_traj.dt:g})")


def _train_model(cfg: RunConfig, traj, n_checkpoints: int):
    n_synth = romlib.n_synth_for_total(cfg.rom.n_total_synthetic, n_checkpoints)
    return romlib.train(
        traj, n_checkpoints, sinkhorn_opts=cfg.rom.sinkhorn_options(),
        mapping=cfg.rom.mapping, correction=cfg.rom.correction,
        n_synth=n_synth, pod_threshold=cfg.rom.pod_threshold,
        sign_strategy=cfg.rom.sign_strategy,
        minl2_regressor=cfg.rom.minl2_regressor, max_workers=_max_workers(),
    )


def cmd_train(cfg: RunConfig) -> None:
    traj = _load_artifact(_train_path(cfg))
    model = _train_model(cfg, traj, cfg.rom.n_checkpoints)
    otio.save_rom_model(model, _model_dir(cfg))
    total = max(model.timings.get("total", 0.0), 1e-12)
    for step, label in (("plans", "steps 2-3 (transport plans)"),
                        ("mapping", "step 4 (time mapping)"),
                        ("correction", "step 6 (residual correction)")):
        sec = model.timings.get(step, 0.0)
        print(f"[otrom] {label}: {sec:.3f} s ({100.0 * sec / total:.2f}%)")
    print(f"[otrom] total training time: {total:.3f} s")
    print(f"[otrom] model saved to {_model_dir(cfg)}")


def _test_times(cfg: RunConfig, traj) -> np.ndarray:
    times = []
    for t in traj.times():
        for o in cfg.test_time_offsets:
            ts = t + o * traj.dt
            if ts <= cfg.fom.t_f + 1e-12:
                times.append(ts)
    return np.array(times)


def cmd_infer(cfg: RunConfig, t_star: float) -> None:
    model = otio.load_rom_model(_model_dir(cfg))
    snap = model.infer_corrected(t_star) if model.corrector is not None \
        else model.infer(t_star)
    out = cfg.work_dir / f"prediction_t{t_star:g}.csv"
    g = model.grid
    centers = g.cell_centers()
    lines = ["cell,x,z,value"]
    for l in range(g.n_cells):
        lines.append(f"{l},{centers[l, 0]:.17g},{centers[l, 1]:.17g},"
                     f"{snap.values[l]:.17g}")
    out.write_text("\n".join(lines) + "\n")
    print(f"[otrom] prediction at t={t_star:g}: min={snap.values.min():.6g} "
          f"max={snap.values.max():.6g} l1={np.abs(snap.values).sum():.6g}")
    print(f"[otrom] wrote {out}")


def cmd_evaluate(cfg: RunConfig) -> None:
    model = otio.load_rom_model(_model_dir(cfg))
    train_traj = _load_artifact(_train_path(cfg))
    ref_traj = _load_artifact(_ref_path(cfg))
    train_times = train_traj.times()
    test_times = _test_times(cfg, train_traj)

    e_disc = romlib.error_metrics("disc", ref_traj, train_traj, train_times)
    otio.export_error_report_csv(e_disc, cfg.work_dir / "e_disc.csv")

    e_interp = romlib.error_metrics("interp", train_traj, model.infer,
                                    train_times)
    otio.export_error_report_csv(e_interp, cfg.work_dir / "e_interp.csv")

    t0 = perf_counter()
    e_gen = romlib.error_metrics("gen", ref_traj, model.infer, test_times)
    infer_seconds = (perf_counter() - t0) / max(len(test_times), 1)
    otio.export_error_report_csv(e_gen, cfg.work_dir / "e_gen.csv")
    reports = {"disc": e_disc, "interp": e_interp, "gen": e_gen}

    if model.corrector is not None:
        e_gen_c = romlib.error_metrics("gen", ref_traj, model.infer_corrected,
                                       test_times)
        otio.export_error_report_csv(e_gen_c, cfg.work_dir / "e_gen_corrected.csv")
        reports["gen_corrected"] = e_gen_c

    # Data-augmentation comparison: basis from the synthetic matrix vs from
    # the checkpoints alone, both at the configured energy threshold.
    n_synth = romlib.n_synth_for_total(cfg.rom.n_total_synthetic,
                                       model.checkpoints.n_checkpoints)
    synth = generate_synthetic_matrix(model.interpolation, n_synth)
    basis_synth = compute_pod(synth.data, threshold=cfg.rom.pod_threshold)
    basis_check = compute_pod(
        np.column_stack([s.values for s in model.checkpoints.snapshots]),
        threshold=cfg.rom.pod_threshold,
    )
    test_snaps = [romlib._snapshot_at(ref_traj, t) for t in test_times]
    rows = ["basis,n_modes,mean_test_projection_error"]
    for name, basis in (("synthetic", basis_synth), ("checkpoints", basis_check)):
        errs = [projection_error(u, basis) for u in test_snaps]
        rows.append(f"{name},{basis.n_modes},{np.mean(errs):.17g}")
    (cfg.work_dir / "pod_projection.csv").write_text("\n".join(rows) + "\n")

    for name, rep in reports.items():
        print(f"[otrom] mean E_{name}: {rep.mean():.6e}")
    print(f"[otrom] mean online inference time: {infer_seconds * 1e3:.3f} ms "
          "(reported, not asserted)")


def cmd_sweep(cfg: RunConfig, checkpoint_list) -> None:
    traj = _load_artifact(_train_path(cfg))
    ref_traj = _load_artifact(_ref_path(cfg))
    train_times = traj.times()
    test_times = _test_times(cfg, traj)
    n_tot = cfg.rom.n_total_synthetic
    rows = ["n_checkpoints,n_synth,n_total,n_total_actual,"
            "mean_e_interp,mean_e_gen"]
    for n_c in checkpoint_list:
        n_synth = romlib.n_synth_for_total(n_tot, n_c)
        model = _train_model(cfg, traj, n_c)
        e_interp = romlib.error_metrics("interp", traj, model.infer,
                                        train_times)
        infer_fn = model.infer_corrected if model.corrector is not None \
            else model.infer
        e_gen = romlib.error_metrics("gen", ref_traj, infer_fn, test_times)
        actual = n_c + n_synth * (n_c - 1)
        rows.append(f"{n_c},{n_synth},{n_tot},{actual},"
                    f"{e_interp.mean():.17g},{e_gen.mean():.17g}")
        print(f"[otrom] N_c={n_c}: mean E_interp={e_interp.mean():.6e} "
              f"mean E_gen={e_gen.mean():.6e}")
    out = cfg.work_dir / "sweep.csv"
    out.write_text("\n".join(rows) + "\n")
    print(f"[otrom] wrote {out}")


def _parse_checkpoint_list(raw: str) -> list[int]:
    try:
        values = [int(part) for part in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigInvalid(f"--checkpoints must be a comma-separated list "
                            f"of integers, got {raw!r}")
    if not values or any(v < 2 for v in values):
        raise ConfigInvalid("--checkpoints entries must be integers >= 2")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otrom",
        description="Transport-based displacement-interpolation ROM pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("generate", "write training and reference trajectories"),
        ("train", "train and persist a model"),
        ("infer", "predict the field at one time"),
        ("evaluate", "compute error metrics and POD comparisons"),
        ("sweep", "train+evaluate across checkpoint counts"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the YAML config")
        if name == "infer":
            p.add_argument("--time", required=True, type=float,
                           help="query time t*")
        if name == "sweep":
            p.add_argument("--checkpoints", required=True,
                           help="comma-separated checkpoint counts, e.g. 2,3,5")
    return parser


_NUMERICAL = (NotConverged, NumericalOverflow, CholeskyFailure, CflViolation)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "generate":
            cmd_generate(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "infer":
            cmd_infer(cfg, args.time)
        elif args.command == "evaluate":
            cmd_evaluate(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg, _parse_checkpoint_list(args.checkpoints))
        return 0
    except ConfigInvalid as e:
        print(f"OTROM-ERROR ConfigInvalid: {e}", file=sys.stderr)
        return 2
    except (MissingArtifact, FileNotFoundError) as e:
        print(f"OTROM-ERROR MissingArtifact: {e}", file=sys.stderr)
        return 3
    except _NUMERICAL as e:
        print(f"OTROM-ERROR {type(e).__name__}: {e}", file=sys.stderr)
        return 4
    except (OtromError, IoError) as e:
        print(f"OTROM-ERROR {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
