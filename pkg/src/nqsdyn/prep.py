"""Initial-state preparation by infidelity minimization against an ED target.

Loss: I = 1 - |<phi|psi>|^2 / (<phi|phi><psi|psi>), global-phase- and
scale-invariant. Gradients follow the conjugate-parameter (Wirtinger)
convention; the finite-difference oracle in the tests treats Re and Im
independently, which fixes the convention unambiguously.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGradientError, NonFiniteError, ShapeMismatchError
from .lattice import DENSE_CAP, SpinBasis
from .rbm import RbmParameters, dense_state, init_random, log_derivatives_batch


@dataclass(frozen=True)
class PrepConfig:
    max_iters: int = 5000
    learning_rate: float = 0.01
    target_infidelity: float = 1e-4
    optimizer: str = "adaptive_moment"  # "adaptive_moment" | "plain_gradient"
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 < self.target_infidelity < 1:
            raise ValueError("target_infidelity must be in (0, 1)")
        if self.optimizer not in ("adaptive_moment", "plain_gradient"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class PrepResult:
    parameters: RbmParameters
    final_infidelity: float
    iterations_used: int
    history: list = field(default_factory=list)  # (iteration, infidelity)


def infidelity(psi: np.ndarray, phi: np.ndarray) -> float:
    """1 - normalized squared overlap; invariant under rescaling either state."""
    psi = np.asarray(psi, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    if psi.shape != phi.shape or psi.ndim != 1:
        raise ShapeMismatchError(f"state shapes differ: {psi.shape} vs {phi.shape}")
    nn = float(np.real(np.vdot(psi, psi)) * np.real(np.vdot(phi, phi)))
    if nn == 0.0:
        raise ValueError("infidelity of a zero vector is undefined")
    return float(1.0 - np.abs(np.vdot(phi, psi)) ** 2 / nn)


def infidelity_gradient(
    p: RbmParameters, target: np.ndarray, basis: SpinBasis, cap: int = DENSE_CAP
) -> np.ndarray:
    """d I / d conj(W_k) by exact summation.

    With Born weights of psi and ratios r = phi/psi:
    grad_k = -Fid * (E_k - <O_k*>), E_k = <O_k* r>/<r>; the moments are
    accumulated division-free as sum conj(psi O_k) phi.
    """
    target = np.asarray(target, dtype=np.complex128)
    if basis.n_sites != p.n_visible:
        raise ShapeMismatchError("basis and parameters disagree on n_sites")
    if target.shape != (basis.dim,):
        raise ShapeMismatchError(f"target has shape {target.shape}, expected ({basis.dim},)")
    psi = dense_state(p, basis, cap=cap)  # unit norm
    o_mat = log_derivatives_batch(p, basis.configurations)
    weights = np.abs(psi) ** 2
    overlap = np.vdot(psi, target)  # <psi|phi>
    if overlap == 0.0:
        raise DegenerateGradientError(
            "target is exactly orthogonal to the variational state; reseed the start"
        )
    fid = float(np.abs(overlap) ** 2 / np.real(np.vdot(target, target)))
    o_mean = weights @ o_mat.conj()
    cross = (psi.conj() * target) @ o_mat.conj() / overlap  # <O* r>/<r>
    grad = -fid * (cross - o_mean)
    if not np.all(np.isfinite(grad.view(np.float64))):
        raise NonFiniteError("non-finite infidelity gradient")
    return grad


def optimize_infidelity(
    n_visible: int,
    n_hidden: int,
    target: np.ndarray,
    cfg: PrepConfig,
    init_scale: float = 0.01,
    start: RbmParameters | None = None,
    update_mask: np.ndarray | None = None,
    cap: int = DENSE_CAP,
) -> PrepResult:
    """Minimize infidelity from a small random start; returns the best seen.

    The adaptive-moment optimizer is Adam on the real view of the complex
    parameter vector (decay 0.9/0.999, floor 1e-8).
    """
    basis = SpinBasis(n_visible)
    target = np.asarray(target, dtype=np.complex128)
    norm = np.linalg.norm(target)
    if norm == 0.0:
        raise ValueError("target state must be nonzero")
    target = target / norm

    p = start if start is not None else init_random(n_visible, n_hidden, init_scale, cfg.seed)
    if update_mask is not None:
        masked = p.flatten()
        masked[~update_mask] = 0.0
        p = RbmParameters.unflatten(masked, n_visible, n_hidden)
    w = p.flatten()

    def loss(vec: np.ndarray) -> float:
        return infidelity(dense_state(RbmParameters.unflatten(vec, n_visible, n_hidden), basis, cap=cap), target)

    current = loss(w)
    if not np.isfinite(current):
        raise NonFiniteError("non-finite infidelity at iteration 0", iteration=0)
    best_w, best_loss = w.copy(), current
    history = [(0, current)]

    n_params = w.shape[0]
    m1 = np.zeros(2 * n_params)
    m2 = np.zeros(2 * n_params)
    beta1, beta2, floor = 0.9, 0.999, 1e-8
    iterations = 0
    for it in range(1, cfg.max_iters + 1):
        if best_loss <= cfg.target_infidelity:
            break
        grad = infidelity_gradient(
            RbmParameters.unflatten(w, n_visible, n_hidden), target, basis, cap=cap
        )
        if update_mask is not None:
            grad = np.where(update_mask, grad, 0.0)
        if cfg.optimizer == "plain_gradient":
            w = w - cfg.learning_rate * grad
        else:
            g = np.concatenate([grad.real, grad.imag])
            m1 = beta1 * m1 + (1 - beta1) * g
            m2 = beta2 * m2 + (1 - beta2) * g * g
            hat1 = m1 / (1 - beta1**it)
            hat2 = m2 / (1 - beta2**it)
            delta = cfg.learning_rate * hat1 / (np.sqrt(hat2) + floor)
            w = w - (delta[:n_params] + 1j * delta[n_params:])
        iterations = it
        current = loss(w)
        if not np.isfinite(current):
            raise NonFiniteError("non-finite infidelity", iteration=it)
        history.append((it, current))
        if current < best_loss:
            best_w, best_loss = w.copy(), current

    return PrepResult(
        parameters=RbmParameters.unflatten(best_w, n_visible, n_hidden),
        final_infidelity=best_loss,
        iterations_used=iterations,
        history=history,
    )
