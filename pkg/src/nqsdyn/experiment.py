"""Experiment orchestration: prep + dynamics (+ sweeps), artifacts on disk.

Exit codes: 0 all runs ok, 3 if any run diverged (a result, not a crash),
2 on numeric errors, 1 on configuration/environment errors. When a sweep
mixes outcomes the most severe applies: numeric_error > diverged > ok.

Per-run directory layout:
    effective_config.yaml     resolved config echo (re-runnable)
    events.jsonl              config echo, prep summary, terminal statuses
    prep_history.csv          (iter, infidelity) when prep is enabled
    prep_params.snap          prepared parameter snapshot
    <point>/                  one per sweep point ("run" for no sweep)
        effective_config.yaml point overrides applied, sweep removed
        trajectory.csv        one row per TrajectoryRecord
        final.snap            terminal parameters
        snapshots/            periodic snapshots when snapshot_stride > 0
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, NumericFailure
from .integrators import Trajectory, run_dynamics
from .lattice import SpinBasis, ground_state
from .prep import PrepConfig, optimize_infidelity
from .rbm import RbmParameters, init_random, save_snapshot
from . import kernels

CSV_COLUMNS = [
    "step", "time", "energy_re", "energy_im", "energy_var", "update_norm",
    "param_norm", "residual", "rank_kept", "s_eig_min", "s_eig_max",
    "fidelity_ed", "status",
]

OUTPUT_ROOT_ENV = "NQSDYN_OUTPUT_ROOT"


def _g(value: float) -> str:
    return f"{float(value):.17g}"


def emit_trajectory_csv(traj: Trajectory, path, observable_names=()):
    """Write the trajectory table; floats carry 17 significant digits so a
    parse of the file reproduces the record values bit-exactly."""
    header = CSV_COLUMNS + list(observable_names)
    lines = [",".join(header)]
    for rec in traj.records:
        row = [
            str(rec.step),
            _g(rec.time),
            _g(rec.energy.real),
            _g(rec.energy.imag),
            _g(rec.energy_variance),
            _g(rec.update_norm),
            _g(rec.param_norm),
            _g(rec.residual),
            "" if rec.rank_kept is None else str(rec.rank_kept),
            _g(rec.spectrum_min),
            _g(rec.spectrum_max),
            "" if rec.fidelity_ed is None else _g(rec.fidelity_ed),
            rec.status,
        ]
        for name in observable_names:
            row.append(_g(rec.observables.get(name, float("nan"))))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _emit_prep_history(history, path):
    lines = ["iter,infidelity"]
    lines += [f"{i},{_g(v)}" for i, v in history]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


class _EventLog:
    def __init__(self, path, enabled=True):
        self.path = Path(path)
        self.enabled = enabled
        if enabled:
            self.path.write_text("", encoding="ascii")

    def emit(self, event: str, **payload):
        if not self.enabled:
            return
        record = {"event": event, **payload}
        with open(self.path, "a", encoding="ascii") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def resolve_output_dir(cfg: ExperimentConfig) -> Path:
    directory = Path(cfg.effective["output"]["directory"])
    if not directory.is_absolute():
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root:
            directory = Path(root) / directory
    return directory


def _update_mask(cfg: ExperimentConfig) -> np.ndarray | None:
    if cfg.effective["rbm"]["visible_biases"]:
        return None
    n, m = cfg.n_sites, cfg.n_hidden
    mask = np.ones(n + m + m * n, dtype=bool)
    mask[:n] = False
    return mask


def prepare_initial_state(cfg: ExperimentConfig, outdir: Path | None = None, log: _EventLog | None = None):
    """Run (or skip) infidelity prep; returns the starting RbmParameters."""
    rbm_cfg = cfg.effective["rbm"]
    prep_cfg = cfg.effective["prep"]
    n, m = cfg.n_sites, cfg.n_hidden
    mask = _update_mask(cfg)

    if not prep_cfg["enabled"]:
        p0 = init_random(n, m, rbm_cfg["init_scale"], rbm_cfg["seed"])
        if mask is not None:
            vec = p0.flatten()
            vec[~mask] = 0.0
            p0 = RbmParameters.unflatten(vec, n, m)
        return p0

    quench = cfg.hamiltonians()
    basis = SpinBasis(n)
    energy, target = ground_state(quench.h_initial, basis)
    result = optimize_infidelity(
        n, m, target,
        PrepConfig(
            max_iters=prep_cfg["max_iters"],
            learning_rate=prep_cfg["learning_rate"],
            target_infidelity=prep_cfg["target_infidelity"],
            optimizer=prep_cfg["optimizer"],
            seed=prep_cfg["seed"],
        ),
        init_scale=rbm_cfg["init_scale"],
        update_mask=mask,
    )
    if log is not None:
        log.emit(
            "prep_summary",
            ground_energy=energy,
            final_infidelity=result.final_infidelity,
            iterations_used=result.iterations_used,
            reached_target=result.final_infidelity <= prep_cfg["target_infidelity"],
        )
    if outdir is not None:
        _emit_prep_history(result.history, outdir / "prep_history.csv")
        save_snapshot(outdir / "prep_params.snap", result.parameters, seed=prep_cfg["seed"])
    return result.parameters


def _point_config(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    eff = copy.deepcopy(cfg.effective)
    eff["sweep"] = {}
    if "dt" in overrides:
        eff["dynamics"]["integrator"]["dt"] = overrides["dt"]
    if "epsilon" in overrides:
        eff["dynamics"]["solver"]["epsilon"] = overrides["epsilon"]
    if "zeta" in overrides:
        eff["dynamics"]["solver"]["zeta"] = overrides["zeta"]
    if "quench_strength" in overrides:
        s = overrides["quench_strength"]
        eff["model"]["final"]["hx"] = eff["model"]["initial"]["hx"] * (1.0 - s)
    return ExperimentConfig(eff)


def run_point(cfg: ExperimentConfig, p0: RbmParameters, point_dir: Path, overrides: dict) -> Trajectory:
    """One dynamics run with sweep overrides applied; writes its artifacts."""
    point_cfg = _point_config(cfg, overrides)
    point_dir.mkdir(parents=True, exist_ok=True)
    (point_dir / "effective_config.yaml").write_text(point_cfg.to_yaml(), encoding="ascii")

    dyn = point_cfg.effective["dynamics"]
    snapshot_dir = point_dir / "snapshots"
    rbm_seed = point_cfg.effective["rbm"]["seed"]
    last_seen = {"step": 0, "time": 0.0, "params": p0}

    def writer(step, time, params):
        last_seen.update(step=step, time=time, params=params)
        if dyn["snapshot_stride"] > 0 and step % dyn["snapshot_stride"] == 0:
            snapshot_dir.mkdir(exist_ok=True)
            save_snapshot(snapshot_dir / f"step_{step:08d}.snap", params,
                          seed=rbm_seed, step=step, time=time)

    traj = run_dynamics(
        p0,
        point_cfg.hamiltonians(),
        point_cfg.solver_strategy(),
        point_cfg.integrator(),
        estimator=point_cfg.estimator(),
        ed_compare=dyn["ed_compare"],
        observables=point_cfg.observable_ops(),
        update_mask=_update_mask(point_cfg),
        snapshot_stride=max(dyn["snapshot_stride"], 1),
        snapshot_writer=writer,
    )
    if "csv" in point_cfg.effective["output"]["formats"]:
        emit_trajectory_csv(traj, point_dir / "trajectory.csv", dyn["observables"])

    save_snapshot(point_dir / "final.snap", last_seen["params"], seed=rbm_seed,
                  step=last_seen["step"], time=last_seen["time"])
    return traj


def run_experiment(cfg: ExperimentConfig, output_dir=None, threads: int | None = None) -> int:
    """Execute prep (if enabled) then dynamics per sweep point."""
    if output_dir is not None:
        cfg = cfg.with_overrides(output_dir=str(output_dir))
    outdir = resolve_output_dir(cfg)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        probe = outdir / ".write_probe"
        probe.write_text("", encoding="ascii")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {outdir} is not writable: {exc}") from exc

    limiter = _thread_limiter(threads)
    with limiter:
        jsonl = "jsonl" in cfg.effective["output"]["formats"]
        log = _EventLog(outdir / "events.jsonl", enabled=jsonl)
        (outdir / "effective_config.yaml").write_text(cfg.to_yaml(), encoding="ascii")
        log.emit("config_loaded", backend=kernels.backend_name(), config=cfg.effective)

        try:
            p0 = prepare_initial_state(cfg, outdir, log)
        except NumericFailure as exc:
            log.emit("prep_failed", error=str(exc))
            return 2

        points = cfg.sweep_points()
        statuses = []
        for label, overrides in points:
            name = label if label else "run"
            log.emit("run_start", point=name, overrides=overrides)
            traj = run_point(cfg, p0, outdir / name, overrides)
            statuses.append(traj.terminal_status)
            log.emit(
                "run_end",
                point=name,
                status=traj.terminal_status,
                terminal_step=traj.terminal_step,
                records=len(traj.records),
            )

        if "numeric_error" in statuses:
            code = 2
        elif "diverged" in statuses:
            code = 3
        else:
            code = 0
        log.emit("experiment_end", exit_code=code, statuses=statuses)
        return code


class _NullLimiter:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _thread_limiter(threads: int | None):
    if threads is None:
        return _NullLimiter()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        os.environ.setdefault("OMP_NUM_THREADS", str(threads))
        return _NullLimiter()
    return threadpool_limits(limits=threads)
