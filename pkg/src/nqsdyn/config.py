"""Experiment configuration: strict YAML schema with defaults.

Unknown keys are rejected (a silent typo would corrupt a stability study),
and every error names the offending dotted path. parse_config returns an
ExperimentConfig whose `effective` dict echoes the fully-resolved values.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import ConfigError
from .integrators import EstimatorParams, IntegratorConfig, SamplerParams
from .lattice import QuenchPair, SpinHamiltonian, heisenberg_chain, tfim_chain
from .solvers import Diagonalization, Geometric, Regularization, SolverStrategy

OBSERVABLE_NAMES = ("magnetization_z", "magnetization_x", "zz_nearest")

_SOLVER_DEFAULTS = {
    "regularization": {"epsilon": 1e-4},
    "diagonalization": {"zeta": 1e-12},
    "geometric": {"rcond": None},
}

_SWEEP_AXES = ("dt", "epsilon", "zeta", "quench_strength")


def _expect_map(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{path} must be a mapping")
    return node


def _known_keys(node: dict, path: str, allowed):
    for key in node:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}'" if path else f"unknown key '{key}'")


def _get_number(node: dict, path: str, key: str, default=None, required=False):
    if key not in node:
        if required:
            raise ConfigError(f"{path}.{key} is required")
        return default
    val = node[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number")
    return float(val)


def _get_int(node: dict, path: str, key: str, default=None, required=False):
    if key not in node:
        if required:
            raise ConfigError(f"{path}.{key} is required")
        return default
    val = node[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}.{key} must be an integer")
    return val


def _get_bool(node: dict, path: str, key: str, default=None):
    if key not in node:
        return default
    val = node[key]
    if not isinstance(val, bool):
        raise ConfigError(f"{path}.{key} must be a boolean")
    return val


def _get_str(node: dict, path: str, key: str, default=None, required=False, choices=None):
    if key not in node:
        if required:
            raise ConfigError(f"{path}.{key} is required")
        return default
    val = node[key]
    if not isinstance(val, str):
        raise ConfigError(f"{path}.{key} must be a string")
    if choices is not None and val not in choices:
        raise ConfigError(f"{path}.{key} must be one of {sorted(choices)}, got '{val}'")
    return val


def _validate_model(node: dict) -> dict:
    node = _expect_map(node, "model")
    mtype = _get_str(node, "model", "type", required=True, choices=("tfim", "heisenberg", "custom"))
    n_sites = _get_int(node, "model", "n_sites", required=True)
    if n_sites is None or n_sites < 1:
        raise ConfigError("model.n_sites must be >= 1")
    out = {"type": mtype, "n_sites": n_sites}

    if mtype in ("tfim", "heisenberg"):
        _known_keys(node, "model", {"type", "n_sites", "boundary", "initial", "final"})
        out["boundary"] = _get_str(node, "model", "boundary", default="open", choices=("open", "periodic"))
        keys = {"j", "hx"} if mtype == "tfim" else {"jx", "jy", "jz", "hx", "hz"}
        for side in ("initial", "final"):
            if side not in node:
                raise ConfigError(f"model.{side} is required")
            sect = _expect_map(node[side], f"model.{side}")
            _known_keys(sect, f"model.{side}", keys)
            vals = {}
            for key in sorted(keys):
                default = 1.0 if (mtype == "tfim" and key == "j") else 0.0
                if mtype == "tfim" and key == "hx":
                    default = None
                vals[key] = _get_number(sect, f"model.{side}", key, default=default,
                                        required=(mtype == "tfim" and key == "hx"))
            out[side] = vals
    else:
        _known_keys(node, "model", {"type", "n_sites", "initial", "final"})
        for side in ("initial", "final"):
            if side not in node:
                raise ConfigError(f"model.{side} is required")
            sect = _expect_map(node[side], f"model.{side}")
            _known_keys(sect, f"model.{side}", {"bonds", "hx", "hz"})
            bonds = sect.get("bonds", [])
            if not isinstance(bonds, list):
                raise ConfigError(f"model.{side}.bonds must be a list")
            parsed = []
            for k, bond in enumerate(bonds):
                if not isinstance(bond, list) or len(bond) != 5:
                    raise ConfigError(f"model.{side}.bonds[{k}] must be [i, j, jx, jy, jz]")
                i, j = bond[0], bond[1]
                if not isinstance(i, int) or not isinstance(j, int):
                    raise ConfigError(f"model.{side}.bonds[{k}] site indices must be integers")
                if not (0 <= i < n_sites and 0 <= j < n_sites) or i == j:
                    raise ConfigError(f"model.{side}.bonds[{k}] sites out of range or equal")
                coup = []
                for c in bond[2:]:
                    if isinstance(c, bool) or not isinstance(c, (int, float)):
                        raise ConfigError(f"model.{side}.bonds[{k}] couplings must be numbers")
                    coup.append(float(c))
                parsed.append([i, j] + coup)
            fields = {}
            for key in ("hx", "hz"):
                val = sect.get(key, 0.0)
                if isinstance(val, (int, float)) and not isinstance(val, bool):
                    fields[key] = [float(val)] * n_sites
                elif isinstance(val, list) and len(val) == n_sites and all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in val
                ):
                    fields[key] = [float(v) for v in val]
                else:
                    raise ConfigError(f"model.{side}.{key} must be a number or a list of length n_sites")
            out[side] = {"bonds": parsed, **fields}
    return out


def _validate_rbm(node: dict) -> dict:
    node = _expect_map(node, "rbm")
    _known_keys(node, "rbm", {"alpha", "m", "visible_biases", "init_scale", "seed"})
    if ("alpha" in node) == ("m" in node):
        raise ConfigError("rbm must set exactly one of 'alpha' or 'm'")
    out = {
        "visible_biases": _get_bool(node, "rbm", "visible_biases", default=True),
        "init_scale": _get_number(node, "rbm", "init_scale", default=0.01),
        "seed": _get_int(node, "rbm", "seed", default=0),
    }
    if out["init_scale"] is None or out["init_scale"] <= 0:
        raise ConfigError("rbm.init_scale must be > 0")
    if "alpha" in node:
        alpha = _get_number(node, "rbm", "alpha", required=True)
        if alpha <= 0:
            raise ConfigError("rbm.alpha must be > 0")
        out["alpha"] = alpha
    else:
        m = _get_int(node, "rbm", "m", required=True)
        if m < 1:
            raise ConfigError("rbm.m must be >= 1")
        out["m"] = m
    return out


def _validate_prep(node: dict, rbm_seed: int) -> dict:
    node = _expect_map(node, "prep")
    _known_keys(node, "prep", {"enabled", "max_iters", "learning_rate", "target_infidelity", "optimizer", "seed"})
    out = {
        "enabled": _get_bool(node, "prep", "enabled", default=True),
        "max_iters": _get_int(node, "prep", "max_iters", default=5000),
        "learning_rate": _get_number(node, "prep", "learning_rate", default=0.01),
        "target_infidelity": _get_number(node, "prep", "target_infidelity", default=1e-4),
        "optimizer": _get_str(node, "prep", "optimizer", default="adaptive_moment",
                              choices=("adaptive_moment", "plain_gradient")),
        "seed": _get_int(node, "prep", "seed", default=rbm_seed),
    }
    if out["max_iters"] < 0:
        raise ConfigError("prep.max_iters must be >= 0")
    if out["learning_rate"] <= 0:
        raise ConfigError("prep.learning_rate must be > 0")
    if not 0 < out["target_infidelity"] < 1:
        raise ConfigError("prep.target_infidelity must be in (0, 1)")
    return out


def _validate_solver(node: dict) -> dict:
    node = _expect_map(node, "dynamics.solver")
    method = _get_str(node, "dynamics.solver", "method", required=True,
                      choices=tuple(_SOLVER_DEFAULTS))
    allowed = {"method"} | set(_SOLVER_DEFAULTS[method])
    _known_keys(node, "dynamics.solver", allowed)
    out = {"method": method, **_SOLVER_DEFAULTS[method]}
    if method == "regularization":
        eps = _get_number(node, "dynamics.solver", "epsilon", default=out["epsilon"])
        if eps <= 0:
            raise ConfigError("dynamics.solver.epsilon must be > 0")
        out["epsilon"] = eps
    elif method == "diagonalization":
        zeta = _get_number(node, "dynamics.solver", "zeta", default=out["zeta"])
        if zeta < 0:
            raise ConfigError("dynamics.solver.zeta must be >= 0")
        out["zeta"] = zeta
    else:
        if node.get("rcond", None) is not None:
            rcond = _get_number(node, "dynamics.solver", "rcond")
            if rcond < 0:
                raise ConfigError("dynamics.solver.rcond must be >= 0")
            out["rcond"] = rcond
    return out


def _validate_sampler(node: dict, rbm_seed: int) -> dict:
    node = _expect_map(node, "dynamics.sampler")
    _known_keys(node, "dynamics.sampler", {"n_samples", "n_chains", "burn_in", "stride", "seed"})
    out = {
        "n_samples": _get_int(node, "dynamics.sampler", "n_samples", default=4096),
        "n_chains": _get_int(node, "dynamics.sampler", "n_chains", default=16),
        "seed": _get_int(node, "dynamics.sampler", "seed", default=rbm_seed),
    }
    for key in ("burn_in", "stride"):
        val = node.get(key, "auto")
        if val == "auto" or val is None:
            out[key] = None
        elif isinstance(val, int) and not isinstance(val, bool):
            out[key] = val
        else:
            raise ConfigError(f"dynamics.sampler.{key} must be an integer or 'auto'")
    if out["n_samples"] < 1 or out["n_chains"] < 1:
        raise ConfigError("dynamics.sampler.n_samples and n_chains must be >= 1")
    if out["n_samples"] % out["n_chains"] != 0:
        raise ConfigError("dynamics.sampler.n_samples must be divisible by n_chains")
    if out["stride"] is not None and out["stride"] < 1:
        raise ConfigError("dynamics.sampler.stride must be >= 1")
    if out["burn_in"] is not None and out["burn_in"] < 0:
        raise ConfigError("dynamics.sampler.burn_in must be >= 0")
    return out


def _validate_dynamics(node: dict, rbm_seed: int) -> dict:
    node = _expect_map(node, "dynamics")
    _known_keys(node, "dynamics", {"integrator", "solver", "estimator", "sampler",
                                   "ed_compare", "snapshot_stride", "observables"})
    if "integrator" not in node:
        raise ConfigError("dynamics.integrator is required")
    integ = _expect_map(node["integrator"], "dynamics.integrator")
    _known_keys(integ, "dynamics.integrator", {"scheme", "dt", "t_max", "blow_up_norm"})
    scheme = _get_str(integ, "dynamics.integrator", "scheme", required=True,
                      choices=("euler", "heun", "tamed_euler", "tamed_heun"))
    dt = _get_number(integ, "dynamics.integrator", "dt", required=True)
    t_max = _get_number(integ, "dynamics.integrator", "t_max", required=True)
    blow_up = _get_number(integ, "dynamics.integrator", "blow_up_norm", default=1e6)
    if dt <= 0:
        raise ConfigError("dynamics.integrator.dt must be > 0")
    if t_max < 0:
        raise ConfigError("dynamics.integrator.t_max must be >= 0")
    if t_max > 0 and dt > t_max * (1 + 1e-12):
        raise ConfigError("dynamics.integrator.dt must not exceed t_max")
    if blow_up <= 0:
        raise ConfigError("dynamics.integrator.blow_up_norm must be > 0")

    if "solver" not in node:
        raise ConfigError("dynamics.solver is required")
    solver = _validate_solver(node["solver"])

    estimator = _get_str(node, "dynamics", "estimator", default="exact", choices=("exact", "mc"))
    if estimator == "mc":
        if "sampler" not in node:
            raise ConfigError("dynamics.sampler is required when estimator is 'mc'")
        sampler = _validate_sampler(node["sampler"], rbm_seed)
    else:
        if "sampler" in node:
            raise ConfigError("dynamics.sampler is only allowed when estimator is 'mc'")
        sampler = None

    observables = node.get("observables", [])
    if not isinstance(observables, list) or not all(isinstance(o, str) for o in observables):
        raise ConfigError("dynamics.observables must be a list of names")
    for name in observables:
        if name not in OBSERVABLE_NAMES:
            raise ConfigError(
                f"dynamics.observables contains unknown name '{name}'; known: {list(OBSERVABLE_NAMES)}"
            )

    snapshot_stride = _get_int(node, "dynamics", "snapshot_stride", default=0)
    if snapshot_stride < 0:
        raise ConfigError("dynamics.snapshot_stride must be >= 0")

    return {
        "integrator": {"scheme": scheme, "dt": dt, "t_max": t_max, "blow_up_norm": blow_up},
        "solver": solver,
        "estimator": estimator,
        "sampler": sampler,
        "ed_compare": _get_bool(node, "dynamics", "ed_compare", default=False),
        "snapshot_stride": snapshot_stride,
        "observables": list(observables),
    }


def _validate_sweep(node: dict, model: dict, solver: dict) -> dict:
    node = _expect_map(node, "sweep")
    _known_keys(node, "sweep", set(_SWEEP_AXES))
    out = {}
    for axis in _SWEEP_AXES:
        if axis not in node:
            continue
        values = node[axis]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{axis} must be a non-empty list")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"sweep.{axis} entries must be numbers")
            if axis in ("dt",) and v <= 0:
                raise ConfigError(f"sweep.{axis} entries must be > 0")
            if axis == "epsilon" and v <= 0:
                raise ConfigError("sweep.epsilon entries must be > 0")
            if axis == "zeta" and v < 0:
                raise ConfigError("sweep.zeta entries must be >= 0")
        out[axis] = [float(v) for v in values]
    if "epsilon" in out and solver["method"] != "regularization":
        raise ConfigError("sweep.epsilon requires dynamics.solver.method 'regularization'")
    if "zeta" in out and solver["method"] != "diagonalization":
        raise ConfigError("sweep.zeta requires dynamics.solver.method 'diagonalization'")
    if "quench_strength" in out:
        if model["type"] != "tfim":
            raise ConfigError("sweep.quench_strength is defined for tfim models only")
        for s in out["quench_strength"]:
            if not 0 <= s:
                raise ConfigError("sweep.quench_strength entries must be >= 0")
    return out


def _validate_output(node: dict) -> dict:
    node = _expect_map(node, "output")
    _known_keys(node, "output", {"directory", "formats"})
    directory = _get_str(node, "output", "directory", default="runs")
    formats = node.get("formats", ["csv", "jsonl"])
    if not isinstance(formats, list) or not formats or not all(
        isinstance(f, str) and f in ("csv", "jsonl") for f in formats
    ):
        raise ConfigError("output.formats must be a non-empty list drawn from ['csv', 'jsonl']")
    return {"directory": directory, "formats": list(dict.fromkeys(formats))}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, defaults-applied experiment description."""

    effective: dict

    @property
    def n_sites(self) -> int:
        return self.effective["model"]["n_sites"]

    @property
    def n_hidden(self) -> int:
        rbm = self.effective["rbm"]
        if "m" in rbm:
            return rbm["m"]
        return max(1, int(round(rbm["alpha"] * self.n_sites)))

    def hamiltonians(self, quench_strength: float | None = None) -> QuenchPair:
        model = self.effective["model"]
        n = model["n_sites"]
        if model["type"] == "tfim":
            periodic = model["boundary"] == "periodic"
            initial = tfim_chain(n, model["initial"]["j"], model["initial"]["hx"], periodic)
            final_hx = model["final"]["hx"]
            if quench_strength is not None:
                final_hx = model["initial"]["hx"] * (1.0 - quench_strength)
            final = tfim_chain(n, model["final"]["j"], final_hx, periodic)
        elif model["type"] == "heisenberg":
            periodic = model["boundary"] == "periodic"
            initial = heisenberg_chain(n, **model["initial"], periodic=periodic)
            final = heisenberg_chain(n, **model["final"], periodic=periodic)
        else:
            def build(side):
                sect = model[side]
                bonds = tuple((b[0], b[1], b[2], b[3], b[4]) for b in sect["bonds"])
                return SpinHamiltonian(n, bonds, hx=np.array(sect["hx"]), hz=np.array(sect["hz"]))
            initial, final = build("initial"), build("final")
        return QuenchPair(initial, final)

    def observable_ops(self) -> dict:
        n = self.n_sites
        quench = self.hamiltonians()
        ops = {}
        for name in self.effective["dynamics"]["observables"]:
            if name == "magnetization_z":
                ops[name] = SpinHamiltonian(n, (), hx=np.zeros(n), hz=np.full(n, 1.0 / n))
            elif name == "magnetization_x":
                ops[name] = SpinHamiltonian(n, (), hx=np.full(n, 1.0 / n), hz=np.zeros(n))
            elif name == "zz_nearest":
                edges = [(b[0], b[1]) for b in quench.h_final.bonds]
                if not edges:
                    edges = [(i, i + 1) for i in range(n - 1)]
                bonds = tuple((i, j, 0.0, 0.0, 1.0 / len(edges)) for i, j in edges)
                ops[name] = SpinHamiltonian(n, bonds, hx=np.zeros(n), hz=np.zeros(n))
        return ops

    def solver_strategy(self, epsilon=None, zeta=None) -> SolverStrategy:
        solver = self.effective["dynamics"]["solver"]
        if solver["method"] == "regularization":
            return Regularization(epsilon if epsilon is not None else solver["epsilon"])
        if solver["method"] == "diagonalization":
            return Diagonalization(zeta if zeta is not None else solver["zeta"])
        return Geometric(solver["rcond"])

    def integrator(self, dt=None) -> IntegratorConfig:
        integ = self.effective["dynamics"]["integrator"]
        return IntegratorConfig(
            scheme=integ["scheme"],
            dt=dt if dt is not None else integ["dt"],
            t_max=integ["t_max"],
            blow_up_norm=integ["blow_up_norm"],
        )

    def estimator(self) -> EstimatorParams:
        dyn = self.effective["dynamics"]
        if dyn["estimator"] == "exact":
            return EstimatorParams(kind="exact")
        s = dyn["sampler"]
        return EstimatorParams(
            kind="mc",
            sampler=SamplerParams(
                n_samples=s["n_samples"],
                n_chains=s["n_chains"],
                burn_in=s["burn_in"],
                stride=s["stride"],
                seed=s["seed"],
            ),
        )

    def sweep_points(self) -> list:
        """Cartesian product of the sweep axes as (label, overrides) pairs."""
        sweep = self.effective.get("sweep", {})
        axes = [(axis, sweep[axis]) for axis in _SWEEP_AXES if axis in sweep]
        if not axes:
            return [("", {})]
        points = [{}]
        for axis, values in axes:
            points = [dict(pt, **{axis: v}) for pt in points for v in values]
        out = []
        for k, pt in enumerate(points):
            label = "point_" + "_".join(f"{axis}={pt[axis]:g}" for axis, _ in axes)
            out.append((label, pt))
        return out

    def with_overrides(self, seed_override: int | None = None, output_dir: str | None = None) -> "ExperimentConfig":
        eff = copy.deepcopy(self.effective)
        if seed_override is not None:
            eff["rbm"]["seed"] = int(seed_override)
            eff["prep"]["seed"] = int(seed_override)
            if eff["dynamics"]["sampler"] is not None:
                eff["dynamics"]["sampler"]["seed"] = int(seed_override)
        if output_dir is not None:
            eff["output"]["directory"] = str(output_dir)
        return ExperimentConfig(eff)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.effective, sort_keys=True, default_flow_style=False)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment config; fill defaults."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not well-formed YAML: {exc}") from exc
    if raw is None:
        raw = {}
    raw = _expect_map(raw, "config")
    _known_keys(raw, "", {"model", "rbm", "prep", "dynamics", "sweep", "output"})
    if "model" not in raw:
        raise ConfigError("model is required")
    if "dynamics" not in raw:
        raise ConfigError("dynamics is required")

    model = _validate_model(raw["model"])
    rbm = _validate_rbm(raw.get("rbm", {"alpha": 1.0}))
    prep = _validate_prep(raw.get("prep", {}), rbm["seed"])
    dynamics = _validate_dynamics(raw["dynamics"], rbm["seed"])
    sweep = _validate_sweep(raw.get("sweep", {}), model, dynamics["solver"])
    output = _validate_output(raw.get("output", {}))

    effective = {
        "model": model,
        "rbm": rbm,
        "prep": prep,
        "dynamics": dynamics,
        "sweep": sweep,
        "output": output,
    }
    cfg = ExperimentConfig(effective)
    cfg.hamiltonians()  # surfaces inconsistent model definitions early
    return cfg
