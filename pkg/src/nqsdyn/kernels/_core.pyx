# cython: language_level=3
"""Compiled implementations of the hot kernels (see numpy_backend for the
reference semantics). Complex transcendentals are built from real libm
calls so no C99 complex.h shim is needed."""

import numpy as np

from libc.math cimport atan2, cos, exp, log, sin

NAME = "compiled"


cdef inline double complex cexp_c(double complex z) noexcept nogil:
    cdef double m = exp(z.real)
    return m * cos(z.imag) + 1j * (m * sin(z.imag))


cdef inline double complex clog1p_c(double complex z) noexcept nogil:
    # log(1+z) for |z| <= 1; hypot-free form is fine at these magnitudes
    cdef double re = 1.0 + z.real
    cdef double im = z.imag
    return 0.5 * log(re * re + im * im) + 1j * atan2(im, re)


cdef inline double complex logcosh2_c(double complex t) noexcept nogil:
    if t.real < 0:
        t = -t
    return t + clog1p_c(cexp_c(-2.0 * t))


def logcosh2(theta):
    """Elementwise log(2 cosh(theta)), overflow-safe."""
    theta = np.ascontiguousarray(theta, dtype=np.complex128)
    out = np.empty_like(theta)
    cdef const double complex[::1] tv = theta.ravel()
    cdef double complex[::1] ov = out.ravel()
    cdef Py_ssize_t k
    for k in range(tv.shape[0]):
        ov[k] = logcosh2_c(tv[k])
    return out


def log_amplitudes(sig, a, b, w):
    sig = np.ascontiguousarray(sig, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.complex128)
    b = np.ascontiguousarray(b, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    cdef Py_ssize_t nb_ = sig.shape[0], n = sig.shape[1], m = w.shape[0]
    out = np.empty(nb_, dtype=np.complex128)
    cdef const double[:, ::1] sv = sig
    cdef const double complex[::1] av = a
    cdef const double complex[::1] bv = b
    cdef const double complex[:, ::1] wv = w
    cdef double complex[::1] ov = out
    cdef Py_ssize_t k, i, j
    cdef double complex acc, theta
    with nogil:
        for k in range(nb_):
            acc = 0
            for i in range(n):
                acc = acc + av[i] * sv[k, i]
            for j in range(m):
                theta = bv[j]
                for i in range(n):
                    theta = theta + wv[j, i] * sv[k, i]
                acc = acc + logcosh2_c(theta)
            ov[k] = acc
    return out


def local_energies(sig, a, b, w, bond_i, bond_j, bond_jx, bond_jy, bond_jz, hx, hz):
    sig = np.ascontiguousarray(sig, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.complex128)
    b = np.ascontiguousarray(b, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    bond_i = np.ascontiguousarray(bond_i, dtype=np.int64)
    bond_j = np.ascontiguousarray(bond_j, dtype=np.int64)
    bond_jx = np.ascontiguousarray(bond_jx, dtype=np.float64)
    bond_jy = np.ascontiguousarray(bond_jy, dtype=np.float64)
    bond_jz = np.ascontiguousarray(bond_jz, dtype=np.float64)
    hx = np.ascontiguousarray(hx, dtype=np.float64)
    hz = np.ascontiguousarray(hz, dtype=np.float64)

    cdef Py_ssize_t nbatch = sig.shape[0], n = sig.shape[1], m = w.shape[0]
    cdef Py_ssize_t nbonds = bond_i.shape[0]
    out = np.empty(nbatch, dtype=np.complex128)
    theta_buf = np.empty(m, dtype=np.complex128)
    lc_buf = np.empty(m, dtype=np.complex128)

    cdef const double[:, ::1] sv = sig
    cdef const double complex[::1] av = a
    cdef const double complex[::1] bv = b
    cdef const double complex[:, ::1] wv = w
    cdef const long[::1] biv = bond_i
    cdef const long[::1] bjv = bond_j
    cdef const double[::1] jxv = bond_jx
    cdef const double[::1] jyv = bond_jy
    cdef const double[::1] jzv = bond_jz
    cdef const double[::1] hxv = hx
    cdef const double[::1] hzv = hz
    cdef double complex[::1] ov = out
    cdef double complex[::1] theta = theta_buf
    cdef double complex[::1] lc = lc_buf

    cdef Py_ssize_t k, i, j, q, q2
    cdef double amp, si, sj
    cdef double complex e, lcs, dl, th
    with nogil:
        for k in range(nbatch):
            lcs = 0
            for j in range(m):
                th = bv[j]
                for i in range(n):
                    th = th + wv[j, i] * sv[k, i]
                theta[j] = th
                lc[j] = logcosh2_c(th)
                lcs = lcs + lc[j]

            e = 0
            for q in range(nbonds):
                e = e + jzv[q] * sv[k, biv[q]] * sv[k, bjv[q]]
            for i in range(n):
                e = e + hzv[i] * sv[k, i]

            for q in range(nbonds):
                if jxv[q] == 0.0 and jyv[q] == 0.0:
                    continue
                i = biv[q]
                j = bjv[q]
                si = sv[k, i]
                sj = sv[k, j]
                amp = jxv[q] - jyv[q] * si * sj
                dl = -2.0 * si * av[i] - 2.0 * sj * av[j]
                for q2 in range(m):
                    dl = dl + logcosh2_c(theta[q2] - 2.0 * si * wv[q2, i] - 2.0 * sj * wv[q2, j]) - lc[q2]
                e = e + amp * cexp_c(dl)

            for i in range(n):
                if hxv[i] == 0.0:
                    continue
                si = sv[k, i]
                dl = -2.0 * si * av[i]
                for q2 in range(m):
                    dl = dl + logcosh2_c(theta[q2] - 2.0 * si * wv[q2, i]) - lc[q2]
                e = e + hxv[i] * cexp_c(dl)

            ov[k] = e
    return out


def metropolis_chains(sig0, a, b, w, sites, log_u, burn_steps, stride, n_records):
    sig = np.array(sig0, dtype=np.float64, order="C")
    a = np.ascontiguousarray(a, dtype=np.complex128)
    b = np.ascontiguousarray(b, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    sites = np.ascontiguousarray(sites, dtype=np.int64)
    log_u = np.ascontiguousarray(log_u, dtype=np.float64)

    cdef Py_ssize_t n_chains = sites.shape[0], n_steps = sites.shape[1]
    cdef Py_ssize_t n = sig.shape[1], m = w.shape[0]
    cdef Py_ssize_t burn = burn_steps, strd = stride, nrec = n_records

    samples = np.empty((n_chains, nrec, n), dtype=np.float64)
    theta = np.empty((n_chains, m), dtype=np.complex128)
    lcs = np.empty(n_chains, dtype=np.complex128)
    thf = np.empty(m, dtype=np.complex128)

    cdef double[:, ::1] sv = sig
    cdef const double complex[::1] av = a
    cdef const double complex[::1] bv = b
    cdef const double complex[:, ::1] wv = w
    cdef const long[:, ::1] stv = sites
    cdef const double[:, ::1] uv = log_u
    cdef double[:, :, ::1] smp = samples
    cdef double complex[:, ::1] thv = theta
    cdef double complex[::1] lcv = lcs
    cdef double complex[::1] thfv = thf

    cdef Py_ssize_t c, t, i, j, s, rec, done
    cdef double complex th, lcs_f, dl
    cdef double si
    cdef long accepted = 0
    with nogil:
        for c in range(n_chains):
            lcv[c] = 0
            for j in range(m):
                th = bv[j]
                for i in range(n):
                    th = th + wv[j, i] * sv[c, i]
                thv[c, j] = th
                lcv[c] = lcv[c] + logcosh2_c(th)
        rec = 0
        for t in range(n_steps):
            for c in range(n_chains):
                s = stv[c, t]
                si = sv[c, s]
                lcs_f = 0
                for j in range(m):
                    thfv[j] = thv[c, j] - 2.0 * si * wv[j, s]
                    lcs_f = lcs_f + logcosh2_c(thfv[j])
                dl = -2.0 * si * av[s] + lcs_f - lcv[c]
                if uv[c, t] < 2.0 * dl.real:
                    accepted = accepted + 1
                    sv[c, s] = -si
                    for j in range(m):
                        thv[c, j] = thfv[j]
                    lcv[c] = lcs_f
            done = t + 1 - burn
            if done > 0 and done % strd == 0 and rec < nrec:
                for c in range(n_chains):
                    for i in range(n):
                        smp[c, rec, i] = sv[c, i]
                rec = rec + 1
    return samples, int(accepted)
