"""Restricted-Boltzmann-machine wave function.

log psi(sigma) = sum_i a_i sigma_i + sum_j log(2 cosh(theta_j)),
theta_j = b_j + sum_i w_ji sigma_i.

Parameter layout (frozen contract, the solvers permute/expand indices):
flattened vector = [a_0..a_{N-1}, b_0..b_{M-1}, w_00, w_01, ... row-major],
so P = N + M + M*N.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CapacityLimitError, ShapeMismatchError
from .lattice import DENSE_CAP, SpinBasis

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class RbmParameters:
    """Immutable variational state: visible biases, hidden biases, weights."""

    a: np.ndarray  # (N,) complex
    b: np.ndarray  # (M,) complex
    w: np.ndarray  # (M, N) complex

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.complex128).copy()
        b = np.asarray(self.b, dtype=np.complex128).copy()
        w = np.asarray(self.w, dtype=np.complex128).copy()
        if a.ndim != 1 or b.ndim != 1 or w.ndim != 2:
            raise ShapeMismatchError("expected a (N,), b (M,), w (M,N)")
        if a.shape[0] < 1 or b.shape[0] < 1:
            raise ShapeMismatchError("N and M must be >= 1")
        if w.shape != (b.shape[0], a.shape[0]):
            raise ShapeMismatchError(
                f"w has shape {w.shape}, expected ({b.shape[0]}, {a.shape[0]})"
            )
        for name, arr in (("a", a), ("b", b), ("w", w)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w", w)

    @property
    def n_visible(self) -> int:
        return self.a.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.b.shape[0]

    @property
    def n_params(self) -> int:
        n, m = self.n_visible, self.n_hidden
        return n + m + m * n

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.w.ravel()])

    @classmethod
    def unflatten(cls, values: np.ndarray, n_visible: int, n_hidden: int) -> "RbmParameters":
        values = np.asarray(values, dtype=np.complex128)
        n, m = n_visible, n_hidden
        if values.shape != (n + m + m * n,):
            raise ShapeMismatchError(
                f"parameter vector has shape {values.shape}, expected ({n + m + m * n},)"
            )
        return cls(values[:n], values[n : n + m], values[n + m :].reshape(m, n))


def init_random(n_visible: int, n_hidden: int, scale: float, seed: int) -> RbmParameters:
    """Gaussian(0, scale^2) real and imaginary parts from PCG64(seed)."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    p = n_visible + n_hidden + n_hidden * n_visible
    re = rng.normal(0.0, scale, size=p)
    im = rng.normal(0.0, scale, size=p)
    return RbmParameters.unflatten(re + 1j * im, n_visible, n_hidden)


def _check_sigma(p: RbmParameters, sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (p.n_visible,):
        raise ShapeMismatchError(
            f"configuration has shape {sigma.shape}, expected ({p.n_visible},)"
        )
    return sigma


def log_amplitude(p: RbmParameters, sigma) -> complex:
    """log psi(sigma), overflow-safe in |Re theta|."""
    sigma = _check_sigma(p, sigma)
    return complex(kernels.log_amplitudes(sigma[None, :], p.a, p.b, p.w)[0])


def log_amplitudes(p: RbmParameters, sigmas: np.ndarray) -> np.ndarray:
    """Batched log psi over rows of sigmas (B, N)."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if sigmas.ndim != 2 or sigmas.shape[1] != p.n_visible:
        raise ShapeMismatchError(
            f"batch has shape {sigmas.shape}, expected (B, {p.n_visible})"
        )
    return kernels.log_amplitudes(sigmas, p.a, p.b, p.w)


def log_derivatives(p: RbmParameters, sigma) -> np.ndarray:
    """O_k = d log psi / d W_k in the flat [a, b, w row-major] layout."""
    sigma = _check_sigma(p, sigma)
    return log_derivatives_batch(p, sigma[None, :])[0]


def log_derivatives_batch(p: RbmParameters, sigmas: np.ndarray) -> np.ndarray:
    """(B, P) matrix of log-derivatives: O_a = sigma, O_b = tanh(theta),
    O_w = tanh(theta_j) sigma_i."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if sigmas.ndim != 2 or sigmas.shape[1] != p.n_visible:
        raise ShapeMismatchError(
            f"batch has shape {sigmas.shape}, expected (B, {p.n_visible})"
        )
    theta = sigmas @ p.w.T + p.b
    th = np.tanh(theta)
    ow = th[:, :, None] * sigmas[:, None, :]
    return np.concatenate(
        [sigmas.astype(np.complex128), th, ow.reshape(sigmas.shape[0], -1)], axis=1
    )


def dense_state(p: RbmParameters, basis: SpinBasis, cap: int = DENSE_CAP) -> np.ndarray:
    """Normalized state vector over the full basis, overflow-safe."""
    if basis.n_sites != p.n_visible:
        raise ShapeMismatchError("basis and parameters disagree on n_sites")
    if basis.dim > cap:
        raise CapacityLimitError(f"dim {basis.dim} exceeds dense cap {cap}")
    logs = log_amplitudes(p, basis.configurations)
    psi = np.exp(logs - logs.real.max())
    return psi / np.linalg.norm(psi)


def save_snapshot(path, p: RbmParameters, *, seed: int = 0, step: int = 0, time: float = 0.0):
    """Write a parameter snapshot: 8-field header + one value per line.

    Header fields: N, M, P, seed, step, time, format version, CRC32 checksum
    of everything above the checksum line. Values are 17-significant-digit
    "re im" pairs in flat layout order, so reloads are bit-exact.
    """
    vec = p.flatten()
    lines = [
        f"n_visible={p.n_visible}",
        f"n_hidden={p.n_hidden}",
        f"n_params={p.n_params}",
        f"seed={int(seed)}",
        f"step={int(step)}",
        f"time={float(time):.17g}",
        f"format_version={SNAPSHOT_VERSION}",
    ]
    payload = "\n".join(lines + [f"{v.real:.17g} {v.imag:.17g}" for v in vec]) + "\n"
    checksum = zlib.crc32(payload.encode())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
        fh.write(f"checksum={checksum:08x}\n")
        for v in vec:
            fh.write(f"{v.real:.17g} {v.imag:.17g}\n")


def load_snapshot(path):
    """Read a snapshot; returns (RbmParameters, header dict)."""
    with open(path, encoding="ascii") as fh:
        raw = fh.read().splitlines()
    header = {}
    k = 0
    while k < len(raw) and "=" in raw[k]:
        key, _, val = raw[k].partition("=")
        header[key] = val
        k += 1
        if key == "checksum":
            break
    required = ("n_visible", "n_hidden", "n_params", "seed", "step", "time", "format_version", "checksum")
    missing = [f for f in required if f not in header]
    if missing:
        raise ValueError(f"snapshot header missing fields: {missing}")
    if int(header["format_version"]) != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot format version {header['format_version']}")
    values = []
    for line in raw[k:]:
        re_s, im_s = line.split()
        values.append(float(re_s) + 1j * float(im_s))
    n, m, pcount = int(header["n_visible"]), int(header["n_hidden"]), int(header["n_params"])
    if len(values) != pcount:
        raise ValueError(f"snapshot holds {len(values)} values, header says {pcount}")
    head_lines = raw[: k - 1]
    payload = "\n".join(head_lines + raw[k:]) + "\n"
    if zlib.crc32(payload.encode()) != int(header["checksum"], 16):
        raise ValueError("snapshot checksum mismatch")
    params = RbmParameters.unflatten(np.array(values), n, m)
    meta = {
        "seed": int(header["seed"]),
        "step": int(header["step"]),
        "time": float(header["time"]),
        "format_version": int(header["format_version"]),
    }
    return params, meta
