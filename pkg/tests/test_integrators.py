import numpy as np
import pytest

from nqsdyn import (
    Diagonalization,
    IntegratorConfig,
    NonFiniteError,
    PrepConfig,
    QuenchPair,
    Scheme,
    SpinBasis,
    euler_step,
    ground_state,
    heun_step,
    optimize_infidelity,
    run_dynamics,
    tamed_euler_step,
    tamed_heun_step,
    tfim_chain,
)


def arr(*vals):
    return np.array(vals, dtype=complex)


class TestEulerStep:
    def test_hand_value(self):
        assert euler_step(arr(1.0), arr(-1.0), 0.1)[0] == pytest.approx(0.9)

    def test_fixed_point(self, rng):
        w = rng.normal(size=5) + 1j * rng.normal(size=5)
        assert np.array_equal(euler_step(w, np.zeros(5, dtype=complex), 0.3), w)

    def test_linear_closed_form(self):
        dt, n = 0.05, 40
        w = arr(1.0)
        for _ in range(n):
            w = euler_step(w, -w, dt)
        assert w[0] == pytest.approx((1 - dt) ** n, rel=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(NonFiniteError):
            euler_step(arr(1e308), arr(1e308), 10.0)


class TestHeunStep:
    def test_hand_value(self):
        out = heun_step(arr(1.0), lambda w: -w, 0.1)
        assert out[0] == pytest.approx(0.905, rel=1e-14)

    def test_zero_field(self, rng):
        w = rng.normal(size=4) + 1j * rng.normal(size=4)
        out = heun_step(w, lambda v: np.zeros_like(v), 0.2)
        assert np.array_equal(out, w)

    def test_constant_field_equals_euler(self):
        c = arr(0.3 - 0.7j)
        out = heun_step(arr(2.0), lambda w: c, 0.25)
        assert out[0] == pytest.approx(2.0 + 0.25 * c[0], rel=1e-14)

    def test_exactly_two_evaluations(self):
        calls = []

        def f(w):
            calls.append(w.copy())
            return -w

        heun_step(arr(1.0), f, 0.1)
        assert len(calls) == 2

    def test_stage_tag_on_failure(self):
        def f(w):
            if w[0] != 1.0:
                raise NonFiniteError("boom")
            return -w

        with pytest.raises(NonFiniteError) as err:
            heun_step(arr(1.0), f, 0.1)
        assert err.value.details["stage"] == "corrector"


class TestTamedEuler:
    def test_hand_value(self):
        out = tamed_euler_step(arr(1.0), arr(-1.0), 0.1)
        assert out[0] == pytest.approx(1 - 0.1 / 1.1, rel=1e-14)
        assert out[0] == pytest.approx(0.9090909, abs=1e-7)

    def test_increment_bound_and_limit(self, rng):
        w = np.zeros(3, dtype=complex)
        for scale in (1.0, 1e3, 1e9, 1e15):
            f = scale * (rng.normal(size=3) + 1j * rng.normal(size=3))
            out = tamed_euler_step(w, f, 0.5)
            inc = np.linalg.norm(out - w)
            expected = 0.5 * np.linalg.norm(f) / (1 + 0.5 * np.linalg.norm(f))
            assert inc == pytest.approx(expected, rel=1e-12)
            assert inc < 1.0
        big = tamed_euler_step(w, arr(1e300, 0, 0), 1.0)
        assert np.linalg.norm(big - w) == pytest.approx(1.0, rel=1e-12)

    def test_small_field_matches_euler(self):
        w, f, dt = arr(0.5), arr(1e-3), 1e-3
        tamed = tamed_euler_step(w, f, dt)
        plain = euler_step(w, f, dt)
        assert abs(tamed[0] - plain[0]) < 1e-8


class TestTamedHeun:
    def test_zero_field(self, rng):
        w = rng.normal(size=4) + 1j * rng.normal(size=4)
        assert np.array_equal(tamed_heun_step(w, lambda v: np.zeros_like(v), 0.1), w)

    def test_scripted_oracle(self):
        # f(w) = -w, dt = 0.1, w = 1: independent arithmetic of the formula
        dt = 0.1
        f1 = -1.0
        predictor = 1.0 + dt * f1 / (1 + dt * abs(f1))
        f2 = -predictor
        d = (dt / 2) * (f1 + f2)
        expected = 1.0 + d / (1 + abs(d))
        out = tamed_heun_step(arr(1.0), lambda w: -w, dt)
        assert out[0] == pytest.approx(expected, rel=1e-14)

    def test_increment_strictly_below_one(self, rng):
        w = np.zeros(2, dtype=complex)
        for scale in (1e2, 1e8, 1e14):
            f = scale * (rng.normal(size=2) + 1j * rng.normal(size=2))
            out = tamed_heun_step(w, lambda v, f=f: f, 1.0)
            assert np.linalg.norm(out - w) < 1.0


class TestConvergenceOrder:
    def fit_slope(self, scheme_step, needs_eval):
        kappa = 2.0
        dts = np.logspace(-1, -3, 5)
        errors = []
        for dt in dts:
            n = int(round(1.0 / dt))
            w = arr(1.0)
            for _ in range(n):
                if needs_eval:
                    w = scheme_step(w, lambda v: -1j * kappa * v, dt)
                else:
                    w = scheme_step(w, -1j * kappa * w, dt)
            errors.append(abs(w[0] - np.exp(-1j * kappa)))
        slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
        return slope

    def test_euler_first_order(self):
        assert abs(self.fit_slope(euler_step, False) - 1.0) <= 0.15

    def test_heun_second_order(self):
        assert abs(self.fit_slope(heun_step, True) - 2.0) <= 0.15


class TestIntegratorConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            IntegratorConfig(scheme="euler", dt=0.0, t_max=1.0)
        with pytest.raises(ValueError):
            IntegratorConfig(scheme="euler", dt=0.5, t_max=0.2)
        with pytest.raises(ValueError):
            IntegratorConfig(scheme="nope", dt=0.1, t_max=1.0)
        cfg = IntegratorConfig(scheme="tamed_heun", dt=0.1, t_max=0.0)
        assert cfg.n_steps == 0
        assert cfg.scheme is Scheme.TAMED_HEUN


@pytest.fixture(scope="module")
def prepared_n4():
    h0 = tfim_chain(4, 1.0, 1.0, periodic=True)
    _, target = ground_state(h0, SpinBasis(4))
    res = optimize_infidelity(4, 8, target,
                              PrepConfig(max_iters=4000, target_infidelity=1e-6, seed=3))
    return h0, res.parameters


class TestRunDynamics:
    def test_zero_quench_stationarity(self, prepared_n4):
        h0, p0 = prepared_n4
        traj = run_dynamics(
            p0, QuenchPair(h0, h0), Diagonalization(1e-12),
            IntegratorConfig(scheme="heun", dt=1e-3, t_max=0.1),
        )
        assert traj.terminal_status == "ok"
        assert len(traj.records) == 101
        e0 = traj.records[0].energy.real
        drift = max(abs(r.energy.real - e0) for r in traj.records)
        assert drift <= 1e-6 * abs(e0)

    def test_tmax_zero_single_record(self, prepared_n4):
        h0, p0 = prepared_n4
        traj = run_dynamics(
            p0, QuenchPair(h0, h0), Diagonalization(1e-12),
            IntegratorConfig(scheme="euler", dt=0.1, t_max=0.0),
        )
        assert len(traj.records) == 1
        assert traj.records[0].status == "ok"
        assert traj.records[0].time == 0.0

    def test_divergence_contrast(self, prepared_n4):
        # blunt blow-up at N=4: large dt + hard quench; tamed variant survives
        h0, p0 = prepared_n4
        quench = QuenchPair(h0, tfim_chain(4, 1.0, 0.0, periodic=True))
        euler = run_dynamics(
            p0, quench, Diagonalization(1e-12),
            IntegratorConfig(scheme="euler", dt=0.5, t_max=20.0, blow_up_norm=1e6),
        )
        tamed = run_dynamics(
            p0, quench, Diagonalization(1e-12),
            IntegratorConfig(scheme="tamed_euler", dt=0.5, t_max=20.0, blow_up_norm=1e6),
        )
        assert euler.terminal_status == "diverged"
        assert euler.terminal_step < euler.records[0].step + 41
        assert [r.status for r in euler.records[:-1]] == ["ok"] * (len(euler.records) - 1)
        assert tamed.terminal_status == "ok"
        assert np.isfinite(tamed.records[-1].param_norm)

    def test_fidelity_and_observables(self, prepared_n4):
        h0, p0 = prepared_n4
        from nqsdyn import SpinHamiltonian

        mz = SpinHamiltonian(4, (), hz=np.full(4, 0.25))
        traj = run_dynamics(
            p0, QuenchPair(h0, tfim_chain(4, 1.0, 0.8, periodic=True)),
            Diagonalization(1e-12),
            IntegratorConfig(scheme="heun", dt=1e-2, t_max=0.1),
            ed_compare=True,
            observables={"mz": mz},
        )
        for rec in traj.records:
            assert 0.0 <= rec.fidelity_ed <= 1.0
            assert "mz" in rec.observables
        assert traj.records[-1].fidelity_ed > 0.999

    def test_time_grid_and_record_order(self, prepared_n4):
        h0, p0 = prepared_n4
        traj = run_dynamics(
            p0, QuenchPair(h0, h0), Diagonalization(1e-12),
            IntegratorConfig(scheme="euler", dt=0.02, t_max=0.1),
        )
        steps = [r.step for r in traj.records]
        assert steps == sorted(steps) == list(range(6))
        for rec in traj.records:
            assert rec.time == rec.step * 0.02
