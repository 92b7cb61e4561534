"""TDVP ingredients: quantum geometric tensor S, force vector F, energy.

Exact summation over the full Hilbert space is the default estimator;
Metropolis Monte Carlo is provided to exercise sampling-noise sensitivity.
Covariances use the two-pass (centered) form: single-pass accumulation
loses the small residuals near stationary states where F ~ 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CapacityLimitError, NonFiniteError, NumericFailure, ShapeMismatchError
from .lattice import DENSE_CAP, SpinBasis, SpinHamiltonian
from .rbm import RbmParameters, log_amplitudes, log_derivatives_batch

HERMITICITY_TOL = 1e-10


@dataclass(frozen=True)
class TdvpProblem:
    """One time-step's linear problem: S f = -i F, plus energy diagnostics."""

    s: np.ndarray  # (P, P) complex Hermitian
    f: np.ndarray  # (P,) complex
    energy: complex
    energy_variance: float


@dataclass(frozen=True)
class SampleSet:
    """Metropolis output: samples in chain-major order plus chain metadata."""

    samples: np.ndarray  # (n_samples, N) of +-1
    n_chains: int
    burn_in: int  # sweeps discarded per chain
    stride: int  # proposals between records
    acceptance_rate: float
    seed: int


def _check_shapes(h: SpinHamiltonian, p: RbmParameters):
    if h.n_sites != p.n_visible:
        raise ShapeMismatchError("Hamiltonian and parameters disagree on n_sites")


def local_energy(h: SpinHamiltonian, p: RbmParameters, sigma) -> complex:
    """E_loc(sigma) = sum_sigma' <sigma|H|sigma'> psi(sigma')/psi(sigma)."""
    _check_shapes(h, p)
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (h.n_sites,):
        raise ShapeMismatchError(
            f"configuration has shape {sigma.shape}, expected ({h.n_sites},)"
        )
    e = local_energies_batch(h, p, sigma[None, :])
    return complex(e[0])


def local_energies_batch(h: SpinHamiltonian, p: RbmParameters, sigmas: np.ndarray) -> np.ndarray:
    """Batched local energies via amplitude-ratio updates (backend kernel)."""
    _check_shapes(h, p)
    t = h.term_arrays()
    e = kernels.local_energies(
        np.asarray(sigmas, dtype=np.float64), p.a, p.b, p.w,
        t["bond_i"], t["bond_j"], t["bond_jx"], t["bond_jy"], t["bond_jz"],
        t["hx"], t["hz"],
    )
    if not np.all(np.isfinite(e)):
        bad = int(np.flatnonzero(~np.isfinite(e))[0])
        raise NonFiniteError(
            "non-finite local energy (amplitude-ratio overflow)",
            configuration=np.asarray(sigmas)[bad].copy(),
        )
    return e


def _local_energies_exact(h: SpinHamiltonian, logs: np.ndarray, basis: SpinBasis) -> np.ndarray:
    """Local energies for the full basis using index XOR for connected states.

    Amplitude-ratio overflow is deliberate here; callers turn the resulting
    non-finite entries into NonFiniteError.
    """
    sig = basis.configurations
    idx = np.arange(basis.dim, dtype=np.int64)
    e = np.zeros(basis.dim, dtype=np.complex128)
    with np.errstate(over="ignore", invalid="ignore"):
        for i, j, jx, jy, jz in h.bonds:
            e += jz * sig[:, i] * sig[:, j]
        e += (sig @ h.hz).astype(np.complex128)
        for i, j, jx, jy, jz in h.bonds:
            if jx == 0.0 and jy == 0.0:
                continue
            amp = jx - jy * sig[:, i] * sig[:, j]
            e += amp * np.exp(logs[idx ^ ((1 << i) | (1 << j))] - logs)
        for i in range(h.n_sites):
            if h.hx[i] != 0.0:
                e += h.hx[i] * np.exp(logs[idx ^ (1 << i)] - logs)
    return e


def _qgt_force(o_mat: np.ndarray, e_loc: np.ndarray, weights: np.ndarray, hermitize: bool) -> TdvpProblem:
    """Weighted covariances of the log-derivatives with themselves and E_loc."""
    with np.errstate(over="ignore", invalid="ignore"):
        o_mean = weights @ o_mat
        e_mean = complex(weights @ e_loc)
        oc = o_mat - o_mean
        ec = e_loc - e_mean
        s = oc.conj().T @ (weights[:, None] * oc)
        f = oc.conj().T @ (weights * ec)
        var = float(weights @ np.abs(ec) ** 2)
    if not (np.all(np.isfinite(s.view(np.float64))) and np.all(np.isfinite(f.view(np.float64)))
            and np.isfinite(e_mean) and np.isfinite(var)):
        raise NonFiniteError("non-finite covariance estimate (local-energy overflow)")
    if hermitize:
        s = 0.5 * (s + s.conj().T)
    else:
        dev = float(np.max(np.abs(s - s.conj().T))) if s.size else 0.0
        if dev > HERMITICITY_TOL:
            raise NumericFailure(
                f"exact-summation S deviates from Hermitian by {dev:.3e}", deviation=dev
            )
    return TdvpProblem(s=s, f=f, energy=e_mean, energy_variance=var)


def exact_qgt_force(h: SpinHamiltonian, p: RbmParameters, basis: SpinBasis, cap: int = DENSE_CAP) -> TdvpProblem:
    """S, F, energy by exact summation with Born weights |psi|^2."""
    _check_shapes(h, p)
    if basis.n_sites != h.n_sites:
        raise ShapeMismatchError("basis and Hamiltonian disagree on n_sites")
    if basis.dim > cap:
        raise CapacityLimitError(f"dim {basis.dim} exceeds dense cap {cap}")
    sig = basis.configurations
    logs = log_amplitudes(p, sig)
    logw = 2.0 * logs.real
    weights = np.exp(logw - logw.max())
    weights /= weights.sum()
    e_loc = _local_energies_exact(h, logs, basis)
    if not np.all(np.isfinite(e_loc)):
        bad = int(np.flatnonzero(~np.isfinite(e_loc))[0])
        raise NonFiniteError(
            "non-finite local energy (amplitude-ratio overflow)",
            configuration=sig[bad].copy(),
        )
    o_mat = log_derivatives_batch(p, sig)
    return _qgt_force(o_mat, e_loc, weights, hermitize=False)


def metropolis_sample(
    p: RbmParameters,
    n_samples: int,
    n_chains: int = 16,
    burn_in: int | None = None,
    stride: int | None = None,
    seed: int = 0,
) -> SampleSet:
    """Single-spin-flip Metropolis sampling of |psi|^2.

    burn_in counts discarded sweeps (N proposals each) per chain, default
    10% of the recording sweeps; stride counts proposals between records,
    default N (one sweep). Chains start from independent uniform-random
    configurations; per-chain substreams are spawned from the seed.
    """
    if n_samples <= 0 or n_chains <= 0:
        raise ValueError("n_samples and n_chains must be positive")
    if n_samples % n_chains != 0:
        raise ValueError(f"n_samples={n_samples} not divisible by n_chains={n_chains}")
    n = p.n_visible
    per_chain = n_samples // n_chains
    if stride is None:
        stride = n
    if burn_in is None:
        burn_in = max(1, (per_chain * stride) // (10 * n))
    if stride < 1 or burn_in < 0:
        raise ValueError("stride must be >= 1 and burn_in >= 0")

    burn_steps = burn_in * n
    total_steps = burn_steps + per_chain * stride
    streams = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n_chains)]
    sig0 = np.empty((n_chains, n))
    sites = np.empty((n_chains, total_steps), dtype=np.int64)
    log_u = np.empty((n_chains, total_steps))
    for c, rng in enumerate(streams):
        sig0[c] = 2.0 * rng.integers(0, 2, size=n) - 1.0
        sites[c] = rng.integers(0, n, size=total_steps)
        log_u[c] = np.log(rng.random(total_steps))

    samples, accepted = kernels.metropolis_chains(
        sig0, p.a, p.b, p.w, sites, log_u, burn_steps, stride, per_chain
    )
    return SampleSet(
        samples=samples.reshape(n_samples, n),
        n_chains=n_chains,
        burn_in=burn_in,
        stride=stride,
        acceptance_rate=accepted / float(n_chains * total_steps),
        seed=seed,
    )


def mc_qgt_force(h: SpinHamiltonian, p: RbmParameters, samples: SampleSet) -> TdvpProblem:
    """Monte Carlo estimator of S, F, energy; S is Hermitized explicitly."""
    _check_shapes(h, p)
    sig = samples.samples
    if sig.shape[0] == 0:
        raise ValueError("empty sample set")
    e_loc = local_energies_batch(h, p, sig)
    o_mat = log_derivatives_batch(p, sig)
    weights = np.full(sig.shape[0], 1.0 / sig.shape[0])
    return _qgt_force(o_mat, e_loc, weights, hermitize=True)


def expectation_observable(
    op: SpinHamiltonian,
    p: RbmParameters,
    basis: SpinBasis | None = None,
    samples: SampleSet | None = None,
    cap: int = DENSE_CAP,
) -> complex:
    """<op> for a bond/field observable, exact or over a sample set."""
    _check_shapes(op, p)
    if (basis is None) == (samples is None):
        raise ValueError("pass exactly one of basis or samples")
    if basis is not None:
        if basis.dim > cap:
            raise CapacityLimitError(f"dim {basis.dim} exceeds dense cap {cap}")
        logs = log_amplitudes(p, basis.configurations)
        logw = 2.0 * logs.real
        weights = np.exp(logw - logw.max())
        weights /= weights.sum()
        o_loc = _local_energies_exact(op, logs, basis)
    else:
        o_loc = local_energies_batch(op, p, samples.samples)
        weights = np.full(o_loc.shape[0], 1.0 / o_loc.shape[0])
    if not np.all(np.isfinite(o_loc)):
        raise NonFiniteError("non-finite local observable estimate")
    return complex(weights @ o_loc)
