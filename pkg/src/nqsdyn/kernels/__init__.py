"""Hot-kernel backend selection.

The compiled Cython core is preferred when importable; the numpy fallback
implements the same signatures. NQSDYN_BACKEND=numpy|compiled pins the
choice (compiled raises if the extension is missing). Module-level
functions dispatch at call time so tests and benchmarks can switch with
set_backend().
"""

import os

from . import numpy_backend

_BACKENDS = {"numpy": numpy_backend}

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None
else:
    _BACKENDS["compiled"] = _compiled


def available_backends():
    return tuple(sorted(_BACKENDS))


def _initial():
    requested = os.environ.get("NQSDYN_BACKEND", "auto").lower()
    if requested == "auto":
        return _BACKENDS.get("compiled", numpy_backend)
    if requested not in _BACKENDS:
        raise ImportError(
            f"NQSDYN_BACKEND={requested!r} but only {available_backends()} are available"
        )
    return _BACKENDS[requested]


_active = _initial()


def set_backend(name: str):
    """Select the kernel backend ('numpy' or 'compiled') process-wide."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active = _BACKENDS[name]


def backend_name() -> str:
    return _active.NAME


def logcosh2(theta):
    return numpy_backend.logcosh2(theta)


def log_amplitudes(sig, a, b, w):
    return _active.log_amplitudes(sig, a, b, w)


def local_energies(sig, a, b, w, bond_i, bond_j, bond_jx, bond_jy, bond_jz, hx, hz):
    return _active.local_energies(sig, a, b, w, bond_i, bond_j, bond_jx, bond_jy, bond_jz, hx, hz)


def metropolis_chains(sig0, a, b, w, sites, log_u, burn_steps, stride, n_records):
    return _active.metropolis_chains(sig0, a, b, w, sites, log_u, burn_steps, stride, n_records)
