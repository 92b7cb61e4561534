"""Vectorized numpy implementations of the hot kernels.

Selected automatically when the compiled extension is unavailable (or when
NQSDYN_BACKEND=numpy). Signatures mirror nqsdyn.kernels._core exactly.
"""

import numpy as np

NAME = "numpy"


def logcosh2(theta: np.ndarray) -> np.ndarray:
    """log(2 cosh(theta)) for complex theta, overflow-safe in Re(theta).

    cosh is even, so theta is folded onto Re >= 0 where
    log(2 cosh t) = t + log(1 + e^{-2t}) involves only magnitudes <= 1.
    """
    theta = np.asarray(theta, dtype=np.complex128)
    folded = np.where(theta.real < 0, -theta, theta)
    return folded + np.log1p(np.exp(-2.0 * folded))


def log_amplitudes(sig: np.ndarray, a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Batched RBM log-amplitudes; sig has shape (B, N) with +-1 entries."""
    theta = sig @ w.T + b
    return sig @ a + logcosh2(theta).sum(axis=1)


def local_energies(
    sig: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    w: np.ndarray,
    bond_i: np.ndarray,
    bond_j: np.ndarray,
    bond_jx: np.ndarray,
    bond_jy: np.ndarray,
    bond_jz: np.ndarray,
    hx: np.ndarray,
    hz: np.ndarray,
) -> np.ndarray:
    """E_loc(sigma) = sum_sigma' <sigma|H|sigma'> psi(sigma')/psi(sigma) per row.

    Amplitude ratios come from log-amplitude differences under single- and
    double-spin flips, using rank-1/rank-2 updates of theta.
    """
    theta = sig @ w.T + b
    lc = logcosh2(theta)
    lcs = lc.sum(axis=1)

    # ratio overflow is deliberate: callers map non-finite entries to errors
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.zeros(sig.shape[0], dtype=np.complex128)
        for k in range(bond_i.shape[0]):
            e += bond_jz[k] * sig[:, bond_i[k]] * sig[:, bond_j[k]]
        e += (sig @ hz).astype(np.complex128)

        for k in range(bond_i.shape[0]):
            if bond_jx[k] == 0.0 and bond_jy[k] == 0.0:
                continue
            i, j = int(bond_i[k]), int(bond_j[k])
            amp = bond_jx[k] - bond_jy[k] * sig[:, i] * sig[:, j]
            theta_f = theta - 2.0 * sig[:, i, None] * w[:, i][None, :] - 2.0 * sig[:, j, None] * w[:, j][None, :]
            dlog = -2.0 * sig[:, i] * a[i] - 2.0 * sig[:, j] * a[j] + logcosh2(theta_f).sum(axis=1) - lcs
            e += np.conj(amp.astype(np.complex128)) * np.exp(dlog)

        for i in range(hx.shape[0]):
            if hx[i] == 0.0:
                continue
            theta_f = theta - 2.0 * sig[:, i, None] * w[:, i][None, :]
            dlog = -2.0 * sig[:, i] * a[i] + logcosh2(theta_f).sum(axis=1) - lcs
            e += hx[i] * np.exp(dlog)

    return e


def metropolis_chains(
    sig0: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    w: np.ndarray,
    sites: np.ndarray,
    log_u: np.ndarray,
    burn_steps: int,
    stride: int,
    n_records: int,
):
    """Single-spin-flip Metropolis on C chains for T proposals each.

    sites (C, T) are proposal positions, log_u (C, T) the log-uniform draws;
    both are generated outside so the chain randomness is owned by the
    caller's per-chain substreams. Records a sample every `stride` proposals
    after `burn_steps` proposals. Returns (samples (C, R, N), accepted count).
    """
    sig = np.array(sig0, dtype=np.float64)
    n_chains, n_steps = sites.shape
    n_sites = sig.shape[1]
    theta = sig @ w.T + b
    lcs = logcosh2(theta).sum(axis=1)
    samples = np.empty((n_chains, n_records, n_sites), dtype=np.float64)
    chain_idx = np.arange(n_chains)
    accepted = 0
    rec = 0
    for t in range(n_steps):
        s = sites[:, t]
        sv = sig[chain_idx, s]
        theta_f = theta - 2.0 * sv[:, None] * w[:, s].T
        lcs_f = logcosh2(theta_f).sum(axis=1)
        dlog = -2.0 * sv * a[s] + lcs_f - lcs
        acc = log_u[:, t] < 2.0 * dlog.real
        accepted += int(acc.sum())
        if acc.any():
            sig[chain_idx[acc], s[acc]] *= -1.0
            theta[acc] = theta_f[acc]
            lcs[acc] = lcs_f[acc]
        done = t + 1 - burn_steps
        if done > 0 and done % stride == 0 and rec < n_records:
            samples[:, rec, :] = sig
            rec += 1
    return samples, accepted
