"""Explicit time integrators and the dynamics driver.

Euler and Heun plus tamed variants: taming bounds the increment norm by 1
(f -> f/(1 + dt*||f||) per stage, and d -> d/(1 + ||d||) for the combined
Heun increment), which suppresses the blow-up of explicit steps under
superlinearly growing updates. The TDVP problem is re-estimated and
re-solved at every integrator stage; nothing is frozen between stages.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityLimitError, NonFiniteError, NumericFailure, ShapeMismatchError
from .expectation import (
    SampleSet,
    TdvpProblem,
    exact_qgt_force,
    expectation_observable,
    metropolis_sample,
    mc_qgt_force,
)
from .lattice import DENSE_CAP, ExactPropagator, QuenchPair, SpinBasis, SpinHamiltonian
from .rbm import RbmParameters, dense_state
from .solvers import SolverReport, SolverStrategy, solve


class Scheme(str, enum.Enum):
    EULER = "euler"
    HEUN = "heun"
    TAMED_EULER = "tamed_euler"
    TAMED_HEUN = "tamed_heun"


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: Scheme
    dt: float
    t_max: float
    blow_up_norm: float = 1e6
    taming_exponent: float = 1.0  # placeholder, fixed

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if self.t_max > 0 and self.dt > self.t_max * (1 + 1e-12):
            raise ValueError("dt must not exceed t_max")
        if not self.blow_up_norm > 0:
            raise ValueError("blow_up_norm must be > 0")
        if self.taming_exponent != 1.0:
            raise ValueError("taming_exponent is a fixed placeholder (1.0)")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt)) if self.t_max > 0 else 0


@dataclass(frozen=True)
class SamplerParams:
    n_samples: int = 4096
    n_chains: int = 16
    burn_in: int | None = None
    stride: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class EstimatorParams:
    kind: str = "exact"  # "exact" | "mc"
    sampler: SamplerParams | None = None

    def __post_init__(self):
        if self.kind not in ("exact", "mc"):
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "mc" and self.sampler is None:
            object.__setattr__(self, "sampler", SamplerParams())


@dataclass(frozen=True)
class TrajectoryRecord:
    step: int
    time: float
    energy: complex
    energy_variance: float
    update_norm: float
    param_norm: float  # infinity norm (the blow-up detector's norm)
    residual: float
    rank_kept: int | None
    spectrum_min: float
    spectrum_max: float
    fidelity_ed: float | None
    observables: dict
    status: str  # ok | diverged | numeric_error


@dataclass
class Trajectory:
    records: list = field(default_factory=list)

    @property
    def terminal_status(self) -> str:
        return self.records[-1].status if self.records else "ok"

    @property
    def terminal_step(self) -> int:
        return self.records[-1].step if self.records else 0


def _check_finite(out: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(out.view(np.float64))):
        raise NonFiniteError("integrator step produced non-finite parameters")
    return out


_quiet = np.errstate(over="ignore", invalid="ignore")


def _check_lengths(w: np.ndarray, f: np.ndarray):
    if w.shape != f.shape:
        raise ShapeMismatchError(f"parameter/update shape mismatch: {w.shape} vs {f.shape}")


def euler_step(w: np.ndarray, f: np.ndarray, dt: float) -> np.ndarray:
    """w + dt f."""
    w = np.asarray(w, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    _check_lengths(w, f)
    with _quiet:
        return _check_finite(w + dt * f)


def tamed_euler_step(w: np.ndarray, f: np.ndarray, dt: float) -> np.ndarray:
    """w + dt f / (1 + dt ||f||); increment norm is dt||f||/(1+dt||f||) < 1."""
    w = np.asarray(w, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    _check_lengths(w, f)
    with _quiet:
        norm = np.linalg.norm(f)
        if not np.isfinite(norm):
            raise NonFiniteError("tamed step received a non-finite update")
        return _check_finite(w + (dt / (1.0 + dt * norm)) * f)


def _staged(f_eval, stage: str, w: np.ndarray) -> np.ndarray:
    try:
        return np.asarray(f_eval(w), dtype=np.complex128)
    except NumericFailure as exc:
        exc.details["stage"] = stage
        raise


def heun_step(w: np.ndarray, f_eval, dt: float) -> np.ndarray:
    """Predictor-corrector: w + dt/2 (f(w) + f(w + dt f(w))).

    Exactly two evaluator calls; failures carry the stage tag.
    """
    w = np.asarray(w, dtype=np.complex128)
    f1 = _staged(f_eval, "predictor", w)
    return _heun_corrector(w, f1, f_eval, dt)


def _heun_corrector(w: np.ndarray, f1: np.ndarray, f_eval, dt: float) -> np.ndarray:
    _check_lengths(w, f1)
    with _quiet:
        predictor = _check_finite(w + dt * f1)
    f2 = _staged(f_eval, "corrector", predictor)
    _check_lengths(w, f2)
    with _quiet:
        return _check_finite(w + (dt / 2.0) * (f1 + f2))


def tamed_heun_step(w: np.ndarray, f_eval, dt: float) -> np.ndarray:
    """Heun with a tamed predictor and the combined increment d -> d/(1+||d||)."""
    w = np.asarray(w, dtype=np.complex128)
    f1 = _staged(f_eval, "predictor", w)
    return _tamed_heun_corrector(w, f1, f_eval, dt)


def _tamed_heun_corrector(w: np.ndarray, f1: np.ndarray, f_eval, dt: float) -> np.ndarray:
    _check_lengths(w, f1)
    predictor = tamed_euler_step(w, f1, dt)
    f2 = _staged(f_eval, "corrector", predictor)
    _check_lengths(w, f2)
    with _quiet:
        d = (dt / 2.0) * (f1 + f2)
        norm = np.linalg.norm(d)
        if not np.isfinite(norm):
            raise NonFiniteError("tamed step received a non-finite update")
        return _check_finite(w + d / (1.0 + norm))


def _advance(scheme: Scheme, w: np.ndarray, f1: np.ndarray, f_eval, dt: float) -> np.ndarray:
    """One step with the stage-1 update already evaluated (the record's solve)."""
    if scheme is Scheme.EULER:
        return euler_step(w, f1, dt)
    if scheme is Scheme.TAMED_EULER:
        return tamed_euler_step(w, f1, dt)
    if scheme is Scheme.HEUN:
        return _heun_corrector(w, f1, f_eval, dt)
    if scheme is Scheme.TAMED_HEUN:
        return _tamed_heun_corrector(w, f1, f_eval, dt)
    raise ValueError(f"unknown scheme {scheme}")


class _Evaluator:
    """estimate -> solve pipeline at given flat parameters, with optional
    frozen-parameter masking (the TDVP problem is reduced to the active
    subspace, solved there, and the update embedded with zeros)."""

    def __init__(self, h, basis, n, m, strategy, estimator, mask=None):
        self.h = h
        self.basis = basis
        self.n = n
        self.m = m
        self.strategy = strategy
        self.estimator = estimator
        self.mask = mask
        self._seed_root = (
            np.random.SeedSequence(estimator.sampler.seed) if estimator.kind == "mc" else None
        )
        self.last: tuple | None = None  # (problem, report, samples)

    def _next_seed(self) -> int:
        child = self._seed_root.spawn(1)[0]
        return int(child.generate_state(1, dtype=np.uint64)[0])

    def estimate(self, p: RbmParameters):
        if self.estimator.kind == "exact":
            return exact_qgt_force(self.h, p, self.basis), None
        s = self.estimator.sampler
        samples = metropolis_sample(
            p, s.n_samples, s.n_chains, s.burn_in, s.stride, seed=self._next_seed()
        )
        return mc_qgt_force(self.h, p, samples), samples

    def __call__(self, w: np.ndarray) -> np.ndarray:
        p = RbmParameters.unflatten(w, self.n, self.m)
        problem, samples = self.estimate(p)
        if self.mask is not None:
            active = self.mask
            reduced = TdvpProblem(
                s=problem.s[np.ix_(active, active)],
                f=problem.f[active],
                energy=problem.energy,
                energy_variance=problem.energy_variance,
            )
            report = solve(reduced, self.strategy)
            update = np.zeros(w.shape[0], dtype=np.complex128)
            update[active] = report.update
            report = SolverReport(
                update=update,
                residual=report.residual,
                rank_kept=report.rank_kept,
                spectrum_min=report.spectrum_min,
                spectrum_max=report.spectrum_max,
                wall_time=report.wall_time,
            )
        else:
            report = solve(problem, self.strategy)
        self.last = (problem, report, samples)
        return report.update


def run_dynamics(
    p0: RbmParameters,
    quench: QuenchPair,
    strategy: SolverStrategy,
    integ: IntegratorConfig,
    estimator: EstimatorParams = EstimatorParams(),
    ed_compare: bool = False,
    observables: dict | None = None,
    update_mask: np.ndarray | None = None,
    snapshot_stride: int = 0,
    snapshot_writer=None,
    cap: int = DENSE_CAP,
) -> Trajectory:
    """Evolve p0 under the post-quench Hamiltonian, recording diagnostics.

    One record per time grid point (t_max/dt + 1 for a clean run); a run
    that blows up (parameter infinity norm above blow_up_norm, or any
    non-finite value) ends with a single terminal record of status
    "diverged"; unrecoverable solver failures end with "numeric_error".
    """
    h = quench.h_final
    n, m = p0.n_visible, p0.n_hidden
    if h.n_sites != n:
        raise ShapeMismatchError("quench Hamiltonians and parameters disagree on n_sites")
    observables = observables or {}

    basis = None
    if estimator.kind == "exact" or ed_compare or observables:
        basis = SpinBasis(n)
        if basis.dim > cap:
            raise CapacityLimitError(f"dim {basis.dim} exceeds dense cap {cap}")

    propagator = psi0 = None
    if ed_compare:
        propagator = ExactPropagator(h, basis, cap=cap)
        psi0 = dense_state(p0, basis, cap=cap)

    evaluator = _Evaluator(h, basis, n, m, strategy, estimator, mask=update_mask)
    dt = integ.dt
    n_steps = integ.n_steps
    w = p0.flatten()
    traj = Trajectory()

    def nan_record(step, status):
        return TrajectoryRecord(
            step=step,
            time=step * dt,
            energy=complex(float("nan"), float("nan")),
            energy_variance=float("nan"),
            update_norm=float("nan"),
            param_norm=float(np.max(np.abs(w))) if w.size else 0.0,
            residual=float("nan"),
            rank_kept=None,
            spectrum_min=float("nan"),
            spectrum_max=float("nan"),
            fidelity_ed=None,
            observables={name: float("nan") for name in observables},
            status=status,
        )

    for step in range(n_steps + 1):
        param_norm = float(np.max(np.abs(w))) if w.size else 0.0
        if not np.isfinite(param_norm) or param_norm > integ.blow_up_norm:
            traj.records.append(nan_record(step, "diverged"))
            break

        try:
            f1 = evaluator(w)
        except NonFiniteError:
            traj.records.append(nan_record(step, "diverged"))
            break
        except NumericFailure:
            traj.records.append(nan_record(step, "numeric_error"))
            break

        problem, report, samples = evaluator.last
        p = RbmParameters.unflatten(w, n, m)
        fidelity = None
        if ed_compare:
            psi_ed = propagator.evolve(psi0, step * dt)
            psi_var = dense_state(p, basis, cap=cap)
            fidelity = float(np.abs(np.vdot(psi_ed, psi_var)) ** 2)
        obs_values = {}
        for name, op in observables.items():
            if estimator.kind == "exact":
                val = expectation_observable(op, p, basis=basis, cap=cap)
            else:
                val = expectation_observable(op, p, samples=samples)
            obs_values[name] = float(val.real)

        traj.records.append(
            TrajectoryRecord(
                step=step,
                time=step * dt,
                energy=complex(problem.energy),
                energy_variance=float(problem.energy_variance),
                update_norm=float(np.linalg.norm(f1)),
                param_norm=param_norm,
                residual=report.residual,
                rank_kept=report.rank_kept,
                spectrum_min=report.spectrum_min,
                spectrum_max=report.spectrum_max,
                fidelity_ed=fidelity,
                observables=obs_values,
                status="ok",
            )
        )
        if snapshot_writer is not None and (
            (snapshot_stride > 0 and step % snapshot_stride == 0) or step == n_steps
        ):
            snapshot_writer(step, step * dt, p)

        if step == n_steps:
            break
        try:
            w = _advance(integ.scheme, w, f1, evaluator, dt)
        except NonFiniteError:
            traj.records.append(nan_record(step + 1, "diverged"))
            break
        except NumericFailure:
            traj.records.append(nan_record(step + 1, "numeric_error"))
            break

    return traj
