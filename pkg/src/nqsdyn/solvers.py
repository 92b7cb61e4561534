"""Update-function solvers for S f = -i F.

Three formulations: ridge-regularized direct solve, eigenbasis truncation
(relative cutoff zeta), and the real-split geometric KKT system solved by
minimum-norm least squares. Residuals are always reported in the original
complex formulation so the three are comparable on one scale.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from .errors import NumericFailure
from .expectation import TdvpProblem

TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class Regularization:
    """S -> S + epsilon*identity, then a Hermitian positive-definite solve."""

    epsilon: float = 1e-4

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")


@dataclass(frozen=True)
class Diagonalization:
    """Eigendecompose S and drop modes with eigenvalue <= zeta * max(lmax, 1)."""

    zeta: float = 1e-12

    def __post_init__(self):
        if self.zeta < 0:
            raise ValueError("zeta must be >= 0")


@dataclass(frozen=True)
class Geometric:
    """Real-split KKT system solved by least squares; rcond as in lstsq.

    rcond=None applies the machine-epsilon * 4P heuristic at solve time.
    """

    rcond: float | None = None

    def __post_init__(self):
        if self.rcond is not None and self.rcond < 0:
            raise ValueError("rcond must be >= 0")


SolverStrategy = Union[Regularization, Diagonalization, Geometric]


@dataclass(frozen=True)
class SolverReport:
    update: np.ndarray  # (P,) complex
    residual: float  # ||S f + iF|| / max(||F||, tiny)
    rank_kept: int | None = None
    spectrum_min: float = float("nan")
    spectrum_max: float = float("nan")
    wall_time: float = 0.0


def _residual(s: np.ndarray, f: np.ndarray, force: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.linalg.norm(s @ f + 1j * force) / max(np.linalg.norm(force), TINY))


def solve_regularized(prob: TdvpProblem, epsilon: float) -> SolverReport:
    """f = -i (S + epsilon)^{-1} F via Cholesky; S PSD makes the shift PD."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    s = prob.s
    shifted = s + epsilon * np.eye(s.shape[0])
    try:
        cho = scipy.linalg.cho_factor(shifted, lower=True)
    except np.linalg.LinAlgError as exc:
        min_eig = float(np.linalg.eigvalsh(s)[0]) if s.size else 0.0
        raise NumericFailure(
            f"regularized matrix not positive definite (min eigenvalue {min_eig:.3e})",
            min_eigenvalue=min_eig,
        ) from exc
    update = scipy.linalg.cho_solve(cho, -1j * prob.f)
    return SolverReport(
        update=update,
        residual=_residual(s, update, prob.f),
        rank_kept=s.shape[0],
    )


def solve_diagonalized(prob: TdvpProblem, zeta: float) -> SolverReport:
    """Invert S in its eigenbasis with near-zero modes removed.

    Modes with eigenvalue <= zeta * max(lmax, 1) are treated as exact zeros
    (the cutoff is relative, with an absolute floor when lmax <= 1, so the
    update is invariant under rescaling S and F together). Equivalent to an
    eigenvalue-truncated pseudoinverse applied to -iF.
    """
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    s = prob.s
    try:
        evals, t_mat = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure("eigendecomposition of S failed") from exc
    threshold = zeta * max(float(evals[-1]), 1.0) if evals.size else 0.0
    kept = evals > threshold
    f_rot = t_mat.conj().T @ prob.f
    coeff = np.zeros_like(f_rot)
    with np.errstate(over="ignore", divide="ignore"):
        coeff[kept] = -1j * f_rot[kept] / evals[kept]
    update = t_mat @ coeff
    return SolverReport(
        update=update,
        residual=_residual(s, update, prob.f),
        rank_kept=int(kept.sum()),
        spectrum_min=float(evals[0]),
        spectrum_max=float(evals[-1]),
    )


def build_geometric_system(prob: TdvpProblem):
    """Real-split KKT system A x = B of size 4P.

    The parameter split interleaves (Re, Im) per parameter; S_geo is the
    Kronecker expansion S x [[1, i], [-i, 1]], whose real part is the metric
    g and imaginary part the symplectic form omega. The force enters as the
    real pairs (Re F_k, Im F_k). A = [[2g, omega^T], [omega, 0]],
    B = [0, -F_geo]; the lower block row is the equation of motion, the
    upper one the stationarity condition with Lagrange multipliers.
    """
    s, force = prob.s, prob.f
    p = s.shape[0]
    s_geo = np.kron(s, np.array([[1.0, 1.0j], [-1.0j, 1.0]]))
    g = s_geo.real
    omega = s_geo.imag
    f_geo = np.empty(2 * p)
    f_geo[0::2] = force.real
    f_geo[1::2] = force.imag
    a_matrix = np.block([[2.0 * g, omega.T], [omega, np.zeros((2 * p, 2 * p))]])
    b_vector = np.concatenate([np.zeros(2 * p), -f_geo])
    return a_matrix, b_vector


def solve_geometric(prob: TdvpProblem, rcond: float | None = None) -> SolverReport:
    """Minimum-norm least-squares solve of the KKT system.

    The Lagrange-multiplier block is discarded; the first 2P entries
    recombine into the complex update. rank_kept is left unset: lstsq's
    rank refers to the 4P real system, not the P complex parameters.
    """
    if rcond is not None and rcond < 0:
        raise ValueError("rcond must be >= 0")
    a_matrix, b_vector = build_geometric_system(prob)
    p = prob.s.shape[0]
    if rcond is None:
        rcond = float(np.finfo(np.float64).eps) * a_matrix.shape[0]
    try:
        x, _, _, _ = np.linalg.lstsq(a_matrix, b_vector, rcond=rcond)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure("least-squares SVD failed on the geometric system") from exc
    update = x[0 : 2 * p : 2] + 1j * x[1 : 2 * p : 2]
    return SolverReport(
        update=update,
        residual=_residual(prob.s, update, prob.f),
    )


def solve(prob: TdvpProblem, strategy: SolverStrategy) -> SolverReport:
    """Dispatch on the strategy; attach the spectrum range and wall time."""
    start = time.perf_counter()
    if isinstance(strategy, Regularization):
        report = solve_regularized(prob, strategy.epsilon)
    elif isinstance(strategy, Diagonalization):
        report = solve_diagonalized(prob, strategy.zeta)
    elif isinstance(strategy, Geometric):
        report = solve_geometric(prob, strategy.rcond)
    else:
        raise TypeError(f"unknown solver strategy {strategy!r}")
    elapsed = time.perf_counter() - start
    if np.isnan(report.spectrum_min) and prob.s.size:
        evals = np.linalg.eigvalsh(prob.s)
        report = SolverReport(
            update=report.update,
            residual=report.residual,
            rank_kept=report.rank_kept,
            spectrum_min=float(evals[0]),
            spectrum_max=float(evals[-1]),
            wall_time=elapsed,
        )
    else:
        report = SolverReport(
            update=report.update,
            residual=report.residual,
            rank_kept=report.rank_kept,
            spectrum_min=report.spectrum_min,
            spectrum_max=report.spectrum_max,
            wall_time=elapsed,
        )
    return report
