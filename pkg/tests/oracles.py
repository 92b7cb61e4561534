"""Independent reference implementations used to freeze expected values.

Everything here is deliberately written as plain loops / textbook formulas,
separate from the library's vectorized or compiled paths.
"""

import numpy as np


def rbm_logpsi(a, b, w, sigma):
    """Direct log psi evaluation (no folding tricks; small arguments only)."""
    total = 0.0 + 0.0j
    for i in range(len(sigma)):
        total += a[i] * sigma[i]
    for j in range(len(b)):
        theta = b[j]
        for i in range(len(sigma)):
            theta += w[j, i] * sigma[i]
        total += np.log(2.0 * np.cosh(theta))
    return total


def brute_force_qgt(h_dense, basis_configs, a, b, w):
    """Covariance S, force F, energy by explicit loops over (sigma, k, k')."""
    dim, n = basis_configs.shape
    m = len(b)
    p = n + m + m * n

    psi = np.array([np.exp(rbm_logpsi(a, b, w, basis_configs[x])) for x in range(dim)])
    rho = np.abs(psi) ** 2
    rho = rho / rho.sum()

    o = np.zeros((dim, p), dtype=complex)
    for x in range(dim):
        sigma = basis_configs[x]
        for i in range(n):
            o[x, i] = sigma[i]
        for j in range(m):
            theta = b[j] + sum(w[j, i] * sigma[i] for i in range(n))
            o[x, n + j] = np.tanh(theta)
            for i in range(n):
                o[x, n + m + j * n + i] = sigma[i] * np.tanh(theta)

    e_loc = np.zeros(dim, dtype=complex)
    for x in range(dim):
        for y in range(dim):
            if h_dense[x, y] != 0:
                e_loc[x] += h_dense[x, y] * psi[y] / psi[x]

    o_mean = np.zeros(p, dtype=complex)
    e_mean = 0.0 + 0.0j
    for x in range(dim):
        o_mean += rho[x] * o[x]
        e_mean += rho[x] * e_loc[x]

    s = np.zeros((p, p), dtype=complex)
    f = np.zeros(p, dtype=complex)
    for x in range(dim):
        for k in range(p):
            f[k] += rho[x] * np.conj(o[x, k]) * e_loc[x]
            for k2 in range(p):
                s[k, k2] += rho[x] * np.conj(o[x, k]) * o[x, k2]
    for k in range(p):
        f[k] -= np.conj(o_mean[k]) * e_mean
        for k2 in range(p):
            s[k, k2] -= np.conj(o_mean[k]) * o_mean[k2]
    var = sum(rho[x] * abs(e_loc[x]) ** 2 for x in range(dim)) - abs(e_mean) ** 2
    return s, f, e_mean, var.real


def rk4_evolve(h_dense, psi0, t_final, dt):
    """Fixed-step RK4 on d psi/dt = -i H psi; dt is adjusted to land on t."""
    psi = np.array(psi0, dtype=complex)
    n_steps = max(1, int(round(t_final / dt)))
    dt = t_final / n_steps

    def rhs(v):
        return -1j * (h_dense @ v)

    for _ in range(n_steps):
        k1 = rhs(psi)
        k2 = rhs(psi + 0.5 * dt * k1)
        k3 = rhs(psi + 0.5 * dt * k2)
        k4 = rhs(psi + dt * k3)
        psi = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def truncated_pinv_update(s, f, zeta):
    """-i * pinv_zeta(S) F with an explicit pseudoinverse matrix."""
    evals, vecs = np.linalg.eigh(s)
    threshold = zeta * max(float(evals[-1]), 1.0)
    inv = np.where(evals > threshold, 1.0 / np.where(evals > threshold, evals, 1.0), 0.0)
    pinv = (vecs * inv) @ vecs.conj().T
    return -1j * (pinv @ f)


def _fd_directional(fun, vec, k, step):
    """Central differences along the real and imaginary axes of entry k."""
    out = []
    for unit in (1.0, 1.0j):
        plus = vec.copy()
        plus[k] += step * unit
        minus = vec.copy()
        minus[k] -= step * unit
        out.append((fun(plus) - fun(minus)) / (2 * step))
    return out  # (d/dx, d/dy)


def fd_holomorphic_derivative(fun, vec, step=1e-5):
    """d fun / d z_k = (d/dx - i d/dy)/2 for holomorphic fun (e.g. log psi)."""
    grad = np.zeros(vec.shape, dtype=complex)
    for k in range(vec.shape[0]):
        dx, dy = _fd_directional(fun, vec, k, step)
        grad[k] = 0.5 * (dx - 1j * dy)
    return grad


def fd_wirtinger_of_real(fun, vec, step=1e-5):
    """d fun / d conj(z_k) = (d/dx + i d/dy)/2 for a real-valued loss."""
    grad = np.zeros(vec.shape, dtype=complex)
    for k in range(vec.shape[0]):
        dx, dy = _fd_directional(fun, vec, k, step)
        grad[k] = 0.5 * (dx + 1j * dy)
    return grad
