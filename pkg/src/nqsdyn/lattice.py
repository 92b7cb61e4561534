"""Spin-1/2 Hilbert space, bond-list Hamiltonians, and the dense ED oracle.

Conventions
-----------
* Spins take values +-1 (sigma-z eigenvalues).
* Basis index k encodes configuration bits: bit i of k is (sigma_i + 1)/2,
  so index 0 is the all-down state (every sigma_i = -1). This enumeration
  order is stable across runs.
* Hamiltonian form:
      H = sum_bonds (Jx XX + Jy YY + Jz ZZ) + sum_i (hx X_i + hz Z_i)
  with real couplings. Off-diagonal bond elements are real
  (Jx - Jy*sigma_i*sigma_j for a double flip) but all amplitudes are carried
  as complex.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityLimitError, ShapeMismatchError

DENSE_CAP = 2**14


@dataclass(frozen=True)
class SpinBasis:
    """Full 2^n basis of a chain of n spin-1/2 sites, in bit-pattern order."""

    n_sites: int

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")

    @property
    def dim(self) -> int:
        return 2**self.n_sites

    @property
    def configurations(self) -> np.ndarray:
        """(dim, n_sites) array of +-1 entries; row k is configuration k."""
        cfg = getattr(self, "_configurations", None)
        if cfg is None:
            k = np.arange(self.dim, dtype=np.int64)
            bits = (k[:, None] >> np.arange(self.n_sites)) & 1
            cfg = (2.0 * bits - 1.0).astype(np.float64)
            cfg.setflags(write=False)
            object.__setattr__(self, "_configurations", cfg)
        return cfg

    def index_of(self, sigma) -> int:
        sigma = np.asarray(sigma)
        if sigma.shape != (self.n_sites,):
            raise ShapeMismatchError(
                f"configuration has shape {sigma.shape}, expected ({self.n_sites},)"
            )
        bits = (sigma > 0).astype(np.int64)
        return int(bits @ (1 << np.arange(self.n_sites, dtype=np.int64)))


@dataclass(frozen=True)
class SpinHamiltonian:
    """Two-body spin Hamiltonian given as a bond list plus per-site fields.

    bonds: sequence of (i, j, Jx, Jy, Jz); fields: per-site (hx, hz).
    """

    n_sites: int
    bonds: tuple = ()
    hx: np.ndarray = field(default=None)
    hz: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        bonds = []
        for bond in self.bonds:
            i, j, jx, jy, jz = bond
            i, j = int(i), int(j)
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise ValueError(f"bond ({i},{j}) out of range for n_sites={self.n_sites}")
            if i == j:
                raise ValueError(f"bond ({i},{j}) couples a site to itself")
            if not all(np.isfinite(c) for c in (jx, jy, jz)):
                raise ValueError(f"bond ({i},{j}) has non-finite couplings")
            bonds.append((i, j, float(jx), float(jy), float(jz)))
        object.__setattr__(self, "bonds", tuple(bonds))
        for name in ("hx", "hz"):
            arr = getattr(self, name)
            arr = np.zeros(self.n_sites) if arr is None else np.asarray(arr, dtype=np.float64)
            if arr.shape != (self.n_sites,):
                raise ShapeMismatchError(f"{name} has shape {arr.shape}, expected ({self.n_sites},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def term_arrays(self) -> dict:
        """Bond/field couplings as flat arrays for the batched kernels."""
        cached = getattr(self, "_terms", None)
        if cached is None:
            nb = len(self.bonds)
            cached = {
                "bond_i": np.array([b[0] for b in self.bonds], dtype=np.int64).reshape(nb),
                "bond_j": np.array([b[1] for b in self.bonds], dtype=np.int64).reshape(nb),
                "bond_jx": np.array([b[2] for b in self.bonds], dtype=np.float64).reshape(nb),
                "bond_jy": np.array([b[3] for b in self.bonds], dtype=np.float64).reshape(nb),
                "bond_jz": np.array([b[4] for b in self.bonds], dtype=np.float64).reshape(nb),
                "hx": np.asarray(self.hx, dtype=np.float64),
                "hz": np.asarray(self.hz, dtype=np.float64),
            }
            object.__setattr__(self, "_terms", cached)
        return cached


@dataclass(frozen=True)
class QuenchPair:
    """Pre- and post-quench Hamiltonians on the same lattice."""

    h_initial: SpinHamiltonian
    h_final: SpinHamiltonian

    def __post_init__(self):
        if self.h_initial.n_sites != self.h_final.n_sites:
            raise ShapeMismatchError("quench members differ in n_sites")

    @property
    def n_sites(self) -> int:
        return self.h_initial.n_sites

    @property
    def quench_strength(self) -> float:
        """Max relative change of any coupling between the two Hamiltonians."""
        rel = 0.0

        def upd(before, after):
            nonlocal rel
            before, after = float(before), float(after)
            scale = max(abs(before), abs(after))
            if scale > 0:
                rel = max(rel, abs(after - before) / scale)

        bi = {(b[0], b[1]): b[2:] for b in self.h_initial.bonds}
        bf = {(b[0], b[1]): b[2:] for b in self.h_final.bonds}
        for key in set(bi) | set(bf):
            ci, cf = bi.get(key, (0, 0, 0)), bf.get(key, (0, 0, 0))
            for x, y in zip(ci, cf):
                upd(x, y)
        for name in ("hx", "hz"):
            for x, y in zip(getattr(self.h_initial, name), getattr(self.h_final, name)):
                upd(x, y)
        return rel


def tfim_chain(n_sites: int, j: float = 1.0, hx: float = 1.0, periodic: bool = False) -> SpinHamiltonian:
    """Transverse-field Ising chain H = -j sum ZZ - hx sum X."""
    edges = [(i, i + 1) for i in range(n_sites - 1)]
    if periodic and n_sites > 2:
        edges.append((n_sites - 1, 0))
    bonds = [(i, k, 0.0, 0.0, -j) for i, k in edges]
    return SpinHamiltonian(n_sites, tuple(bonds), hx=np.full(n_sites, -hx), hz=np.zeros(n_sites))


def heisenberg_chain(
    n_sites: int,
    jx: float = 1.0,
    jy: float = 1.0,
    jz: float = 1.0,
    hx: float = 0.0,
    hz: float = 0.0,
    periodic: bool = False,
) -> SpinHamiltonian:
    """Heisenberg chain H = sum (jx XX + jy YY + jz ZZ) + sum (hx X + hz Z)."""
    edges = [(i, i + 1) for i in range(n_sites - 1)]
    if periodic and n_sites > 2:
        edges.append((n_sites - 1, 0))
    bonds = [(i, k, jx, jy, jz) for i, k in edges]
    return SpinHamiltonian(n_sites, tuple(bonds), hx=np.full(n_sites, hx), hz=np.full(n_sites, hz))


def apply_hamiltonian_row(h: SpinHamiltonian, sigma) -> list:
    """All (sigma', <sigma'|H|sigma>) with nonzero amplitude, diagonal first.

    Entries connected by several terms are merged; exact zeros are dropped.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (h.n_sites,):
        raise ShapeMismatchError(
            f"configuration has shape {sigma.shape}, expected ({h.n_sites},)"
        )
    acc: dict = {}
    order: list = []

    def add(cfg: np.ndarray, amp: complex):
        key = cfg.tobytes()
        if key not in acc:
            acc[key] = [cfg, 0.0 + 0.0j]
            order.append(key)
        acc[key][1] += amp

    diag = 0.0
    for i, j, jx, jy, jz in h.bonds:
        diag += jz * sigma[i] * sigma[j]
    diag += float(h.hz @ sigma)
    add(sigma.copy(), complex(diag))

    for i, j, jx, jy, jz in h.bonds:
        amp = jx - jy * sigma[i] * sigma[j]
        if amp != 0.0:
            flipped = sigma.copy()
            flipped[i] *= -1
            flipped[j] *= -1
            add(flipped, complex(amp))
    for i in range(h.n_sites):
        if h.hx[i] != 0.0:
            flipped = sigma.copy()
            flipped[i] *= -1
            add(flipped, complex(h.hx[i]))

    return [(acc[k][0], acc[k][1]) for k in order if acc[k][1] != 0.0]


def dense_matrix(h: SpinHamiltonian, basis: SpinBasis, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense Hermitian matrix of h in the basis's bit-pattern order."""
    if basis.n_sites != h.n_sites:
        raise ShapeMismatchError("basis and Hamiltonian disagree on n_sites")
    if basis.dim > cap:
        raise CapacityLimitError(f"dim {basis.dim} exceeds dense cap {cap}")
    dim = basis.dim
    sig = basis.configurations
    idx = np.arange(dim, dtype=np.int64)
    mat = np.zeros((dim, dim), dtype=np.complex128)

    diag = np.zeros(dim)
    for i, j, jx, jy, jz in h.bonds:
        diag += jz * sig[:, i] * sig[:, j]
    diag += sig @ h.hz
    mat[idx, idx] = diag

    for i, j, jx, jy, jz in h.bonds:
        amp = jx - jy * sig[:, i] * sig[:, j]
        target = idx ^ ((1 << i) | (1 << j))
        np.add.at(mat, (target, idx), amp)
    for i in range(h.n_sites):
        if h.hx[i] != 0.0:
            target = idx ^ (1 << i)
            np.add.at(mat, (target, idx), h.hx[i])
    return mat


def ground_state(h: SpinHamiltonian, basis: SpinBasis, cap: int = DENSE_CAP):
    """Lowest eigenvalue and a normalized eigenvector of the dense matrix."""
    mat = dense_matrix(h, basis, cap=cap)
    evals, evecs = np.linalg.eigh(mat)
    vec = np.ascontiguousarray(evecs[:, 0])
    return float(evals[0]), vec / np.linalg.norm(vec)


class ExactPropagator:
    """Cached eigendecomposition of a Hamiltonian for repeated e^{-iHt} psi."""

    def __init__(self, h: SpinHamiltonian, basis: SpinBasis, cap: int = DENSE_CAP):
        mat = dense_matrix(h, basis, cap=cap)
        self._evals, self._evecs = np.linalg.eigh(mat)

    def evolve(self, psi0: np.ndarray, t: float) -> np.ndarray:
        psi0 = np.asarray(psi0, dtype=np.complex128)
        if psi0.shape != (self._evals.shape[0],):
            raise ShapeMismatchError("state length does not match the propagator dimension")
        norm = np.linalg.norm(psi0)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"input state norm {norm:.8g} deviates from 1 by more than 1e-6")
        if not np.isfinite(t):
            raise ValueError("time must be finite")
        coeff = self._evecs.conj().T @ psi0
        return self._evecs @ (np.exp(-1j * self._evals * t) * coeff)


def exact_evolve(h: SpinHamiltonian, psi0: np.ndarray, t: float, basis: SpinBasis, cap: int = DENSE_CAP) -> np.ndarray:
    """e^{-iHt} psi0 via full eigendecomposition."""
    return ExactPropagator(h, basis, cap=cap).evolve(psi0, t)
