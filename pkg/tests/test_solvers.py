import numpy as np
import pytest

from nqsdyn import (
    Diagonalization,
    Geometric,
    Regularization,
    TdvpProblem,
    build_geometric_system,
    solve,
    solve_diagonalized,
    solve_geometric,
    solve_regularized,
)

from oracles import truncated_pinv_update


def problem(s, f):
    return TdvpProblem(s=np.asarray(s, dtype=complex), f=np.asarray(f, dtype=complex),
                       energy=0.0, energy_variance=0.0)


def random_psd(rng, p, rank=None, cond=None):
    """Hermitian PSD with controlled rank or condition number."""
    q, _ = np.linalg.qr(rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p)))
    if rank is None:
        rank = p
    if cond is None:
        evals = np.sort(rng.uniform(0.5, 5.0, size=p))[::-1]
    else:
        evals = np.logspace(0, -np.log10(cond), p)
    evals[rank:] = 0.0
    return (q * evals) @ q.conj().T, evals


def random_force(rng, p):
    return rng.normal(size=p) + 1j * rng.normal(size=p)


class TestRegularized:
    def test_scalar_inverse(self):
        rep = solve_regularized(problem([[1.0]], [1.0]), 1e-15)
        assert rep.update[0] == pytest.approx(-1j)

    def test_epsilon_sets_null_scale(self):
        rep = solve_regularized(problem([[0.0]], [1.0]), 1e-3)
        assert rep.update[0] == pytest.approx(-1000j)

    def test_residual_small_on_pd(self, rng):
        p = 20
        s, _ = random_psd(rng, p)
        f = random_force(rng, p)
        eps = 1e-13
        rep = solve_regularized(problem(s, f), eps)
        lhs = (s + eps * np.eye(p)) @ rep.update + 1j * f
        assert np.linalg.norm(lhs) <= 1e-10 * np.linalg.norm(f)

    def test_epsilon_validation(self):
        with pytest.raises(ValueError):
            solve_regularized(problem([[1.0]], [1.0]), 0.0)


class TestDiagonalized:
    def test_rank_deficient_example(self):
        rep = solve_diagonalized(problem(np.diag([1.0, 0.0]), [2.0, 3.0]), 1e-12)
        assert np.allclose(rep.update, [-2j, 0.0], atol=1e-14)
        assert rep.rank_kept == 1

    def test_matches_regularized_when_well_conditioned(self, rng):
        p = 10
        s, _ = random_psd(rng, p)
        f = random_force(rng, p)
        dia = solve_diagonalized(problem(s, f), 0.0)
        reg = solve_regularized(problem(s, f), 1e-15)
        rel = np.linalg.norm(dia.update - reg.update) / np.linalg.norm(reg.update)
        assert rel < 1e-8

    def test_cutoff_semantics(self):
        rep = solve_diagonalized(problem(np.diag([1.0, 1e-20]), [1.0, 5.0]), 1e-12)
        assert np.allclose(rep.update, [-1j, 0.0], atol=1e-14)
        assert rep.rank_kept == 1

    def test_pseudoinverse_oracle_100_random(self, rng):
        for _ in range(100):
            p = int(rng.integers(2, 16))
            rank = int(rng.integers(1, p + 1))
            s, _ = random_psd(rng, p, rank=rank)
            f = random_force(rng, p)
            rep = solve_diagonalized(problem(s, f), 1e-12)
            ref = truncated_pinv_update(s, f, 1e-12)
            assert np.max(np.abs(rep.update - ref)) < 1e-10

    def test_null_direction_contrast(self, rng):
        # F entirely in the null space: dia gives 0, reg gives ||F||/eps
        p = 6
        s, _ = random_psd(rng, p, rank=4)
        evals, vecs = np.linalg.eigh(s)
        f = vecs[:, 0] * 2.0  # null eigenvector
        assert evals[0] < 1e-12
        dia = solve_diagonalized(problem(s, f), 1e-12)
        assert np.linalg.norm(dia.update) <= 1e-12
        eps = 1e-4
        reg = solve_regularized(problem(s, f), eps)
        assert np.linalg.norm(reg.update) == pytest.approx(np.linalg.norm(f) / eps, rel=1e-6)

    def test_scale_covariance(self, rng):
        p = 8
        s, _ = random_psd(rng, p, rank=6)
        s = s * 10.0  # keep lmax well above the absolute floor
        f = random_force(rng, p)
        base = solve_diagonalized(problem(s, f), 1e-12)
        for c in (0.5, 3.0, 100.0):
            scaled = solve_diagonalized(problem(c * s, c * f), 1e-12)
            assert np.max(np.abs(scaled.update - base.update)) <= 1e-10
            assert scaled.rank_kept == base.rank_kept


class TestGeometricSystem:
    def test_p1_expansion(self):
        a, b = build_geometric_system(problem([[2.0]], [1.0 + 1.0j]))
        g = 2.0 * np.eye(2)
        omega = np.array([[0.0, 2.0], [-2.0, 0.0]])
        assert np.allclose(a[:2, :2], 2 * g)
        assert np.allclose(a[:2, 2:], omega.T)
        assert np.allclose(a[2:, :2], omega)
        assert np.allclose(a[2:, 2:], 0.0)
        assert np.allclose(b, [0.0, 0.0, -1.0, -1.0])

    def test_dimensions_4p(self, rng):
        p = 5
        s, _ = random_psd(rng, p)
        a, b = build_geometric_system(problem(s, random_force(rng, p)))
        assert a.shape == (20, 20)
        assert b.shape == (20,)

    def test_metric_symmetric_symplectic_antisymmetric(self, rng):
        p = 7
        s, _ = random_psd(rng, p)
        s_geo = np.kron(s, np.array([[1.0, 1.0j], [-1.0j, 1.0]]))
        g, omega = s_geo.real, s_geo.imag
        assert np.max(np.abs(g - g.T)) <= 1e-12
        assert np.max(np.abs(omega + omega.T)) <= 1e-12


class TestGeometricSolve:
    def test_p1_analytic(self):
        rep = solve_geometric(problem([[2.0]], [1.0 + 1.0j]), None)
        assert rep.update[0] == pytest.approx(0.5 - 0.5j, abs=1e-12)

    def test_agrees_with_diagonalized(self, rng):
        p = 10
        s, _ = random_psd(rng, p)
        f = random_force(rng, p)
        geo = solve_geometric(problem(s, f), None)
        dia = solve_diagonalized(problem(s, f), 1e-12)
        rel = np.linalg.norm(geo.update - dia.update) / np.linalg.norm(dia.update)
        assert rel < 1e-6

    def test_trivial_system(self):
        rep = solve_geometric(problem(np.zeros((3, 3)), np.zeros(3)), None)
        assert np.allclose(rep.update, 0.0)

    def test_constraint_satisfaction_consistent(self, rng):
        # F chosen so S f_true = -iF is solvable: omega f + F_geo ~ 0
        for _ in range(10):
            p = int(rng.integers(2, 9))
            rank = int(rng.integers(1, p + 1))
            s, _ = random_psd(rng, p, rank=rank)
            f_true = random_force(rng, p)
            force = 1j * (s @ f_true)
            rep = solve_geometric(problem(s, force), None)
            s_geo = np.kron(s, np.array([[1.0, 1.0j], [-1.0j, 1.0]]))
            omega = s_geo.imag
            f_geo = np.empty(2 * p)
            f_geo[0::2] = force.real
            f_geo[1::2] = force.imag
            x = np.empty(2 * p)
            x[0::2] = rep.update.real
            x[1::2] = rep.update.imag
            err = np.linalg.norm(omega @ x + f_geo)
            assert err <= 1e-8 * max(np.linalg.norm(f_geo), 1e-300)


class TestDispatch:
    def test_regularization_null_mode(self):
        rep = solve(problem([[0.0]], [1.0]), Regularization(1e-4))
        assert rep.update[0] == pytest.approx(-1e4 * 1j)

    def test_defaults(self):
        assert 1e-5 <= Regularization().epsilon <= 1e-3
        assert Diagonalization().zeta == 1e-12
        assert Geometric().rcond is None

    def test_spectrum_and_walltime_attached(self, rng):
        p = 6
        s, evals = random_psd(rng, p)
        f = random_force(rng, p)
        for strategy in (Regularization(1e-6), Diagonalization(1e-12), Geometric()):
            rep = solve(problem(s, f), strategy)
            assert rep.spectrum_max == pytest.approx(evals[0], rel=1e-10)
            assert rep.spectrum_min == pytest.approx(evals[-1], rel=1e-8, abs=1e-12)
            assert rep.wall_time >= 0.0

    def test_invalid_strategy(self):
        with pytest.raises(TypeError):
            solve(problem([[1.0]], [1.0]), "regularize-it")

    def test_cross_agreement_regular_regime(self, rng):
        # smaller version of acceptance criterion 1
        for _ in range(20):
            p = int(rng.integers(2, 31))
            s, _ = random_psd(rng, p, cond=10.0 ** rng.uniform(0, 6))
            f = random_force(rng, p)
            prob = problem(s, f)
            reg = solve_regularized(prob, 1e-12).update
            dia = solve_diagonalized(prob, 1e-12).update
            geo = solve_geometric(prob, None).update
            scale = np.linalg.norm(dia)
            assert np.linalg.norm(reg - dia) / scale < 1e-6
            assert np.linalg.norm(geo - dia) / scale < 1e-6
