"""Split-step flows, the composed stepper, trajectories and the pointwise inequality."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slognls import diagnostics as diag, solver
from slognls.errors import DivergenceError, ParameterError
from slognls.grid import Field, GridSpec
from slognls.solver import PotentialSpec, SolverConfig, Stepper


def _rand(spec, seed):
    rng = np.random.default_rng(seed)
    return Field(spec, rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape))


def _gauss(spec, w=1.0):
    return Field(spec, np.exp(-spec.radius2() / (2 * w * w)) + 0j)


def _free_gaussian(x, t, w=1.0):
    """Exact solution of i u_t = u_xx from exp(-x^2 / (2 w^2))."""
    s = w * w - 2j * t
    return np.sqrt(w * w / s) * np.exp(-x * x / (2 * s))


class TestConfig:
    def test_defaults(self):
        c = SolverConfig()
        assert c.n_steps == 1000

    @pytest.mark.parametrize("kw", [{"dt": 0.0}, {"T": -1.0}, {"delta": -0.1}, {"scheme": "rk4"},
                                    {"record_every": 0}, {"dt": 0.3, "T": 1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            SolverConfig(**kw)

    def test_deterministic_potential_needs_V(self):
        with pytest.raises(ParameterError):
            PotentialSpec("deterministic")

    def test_truncated_potential(self):
        spec = GridSpec(1, 64, 16.0)
        V = PotentialSpec("deterministic", V=lambda x: np.ones_like(x), n=2.0).field(spec)
        r = np.abs(spec.axis())
        assert np.all(V[r <= 2] == 1.0) and np.all(V[r >= 4] == 0.0)
        assert np.all((V >= 0) & (V <= 1))


class TestLinearStep:
    def test_single_mode_phase(self):
        spec = GridSpec(2, 32, 4.0)
        x, y = spec.coords()
        k = spec.k_unit * np.array([2, -1])
        u = np.exp(1j * (k[0] * x + k[1] * y))
        out = solver.linear_step(Field(spec, u), 0.3).values
        assert np.max(np.abs(out - np.exp(1j * (k @ k) * 0.3) * u)) < 1e-12

    def test_zero_dt(self):
        u = _rand(GridSpec(1, 64, 4.0), 0)
        assert np.allclose(solver.linear_step(u, 0.0).values, u.values, atol=1e-14)

    def test_unitary(self):
        u = _rand(GridSpec(2, 32, 4.0), 1)
        out = solver.linear_step(u, 0.7)
        assert abs(diag.mass(out) / diag.mass(u) - 1) < 1e-12


class TestPointwiseFlows:
    def test_constant_potential_is_global_phase(self):
        u = _rand(GridSpec(1, 32, 4.0), 2)
        out = solver.potential_step(u, np.full(32, 1.5), 0.2).values
        assert np.allclose(out, np.exp(-1j * 0.3) * u.values, atol=1e-15)

    def test_potential_zero_dt(self):
        u = _rand(GridSpec(1, 32, 4.0), 2)
        assert np.array_equal(solver.potential_step(u, np.arange(32.0), 0.0).values, u.values)

    def test_potential_preserves_modulus(self):
        spec = GridSpec(2, 32, 4.0)
        u = _rand(spec, 3)
        W = np.random.default_rng(4).standard_normal(spec.shape) * 50
        out = solver.potential_step(u, W, 0.37).values
        assert np.max(np.abs(np.abs(out) - np.abs(u.values))) < 1e-14

    def test_complex_potential_rejected(self):
        u = _rand(GridSpec(1, 32, 4.0), 2)
        with pytest.raises(ParameterError):
            solver.potential_step(u, np.ones(32) * 1j, 0.1)

    def test_log_unit_modulus_fixed(self):
        spec = GridSpec(1, 32, 4.0)
        u = Field(spec, np.exp(1j * spec.axis()))
        assert np.max(np.abs(solver.log_step(u, 1.0, 0.0, 0.5).values - u.values)) < 1e-15

    def test_log_constant_closed_form(self):
        spec = GridSpec(1, 16, 4.0)
        dt = 0.01
        out = solver.log_step(Field(spec, np.full(16, 2.0 + 0j)), 1.0, 0.0, dt).values
        assert np.allclose(out, 2 * np.exp(-1j * dt * np.log(4.0)), atol=1e-15)

    def test_log_large_delta_is_constant_phase(self):
        spec = GridSpec(1, 64, 4.0)
        u = _rand(spec, 5)
        lam, dt, delta = 1.3, 0.05, 1e3
        out = solver.log_step(u, lam, delta, dt).values
        approx = u.values * np.exp(-1j * lam * dt * np.log(delta))
        bound = abs(lam) * dt * np.max(np.abs(u.values)) ** 2 / delta
        assert np.max(np.abs(out - approx)) / np.max(np.abs(u.values)) <= bound

    def test_log_vacuum(self):
        spec = GridSpec(1, 16, 4.0)
        u = Field(spec, np.zeros(16, complex))
        assert np.array_equal(solver.log_step(u, 1.0, 0.0, 0.1).values, u.values)

    def test_log_preserves_modulus(self):
        u = _rand(GridSpec(2, 32, 4.0), 6)
        out = solver.log_step(u, 2.0, 0.0, 0.3).values
        assert np.max(np.abs(np.abs(out) - np.abs(u.values))) < 1e-14

    def test_potential_and_log_commute(self):
        spec = GridSpec(2, 32, 4.0)
        u = _rand(spec, 7)
        W = np.random.default_rng(8).standard_normal(spec.shape)
        a = solver.log_step(solver.potential_step(u, W, 0.1), 1.0, 0.01, 0.1).values
        b = solver.potential_step(solver.log_step(u, 1.0, 0.01, 0.1), W, 0.1).values
        assert np.max(np.abs(a - b)) < 1e-13


class TestStrang:
    def test_free_flow_matches_linear_step(self):
        u = _rand(GridSpec(1, 64, 4.0), 9)
        cfg = SolverConfig(lam=0.0, dt=0.01, T=0.01)
        a = solver.strang_step(u, cfg).values
        b = solver.linear_step(u, 0.01).values
        assert np.max(np.abs(a - b)) < 1e-12

    def test_all_zero_is_identity(self):
        spec = GridSpec(2, 16, 4.0)
        u = _rand(spec, 10)
        out = Stepper(spec, 0.0, 0.0, 0.0, 0.0).step(u.values)
        assert np.max(np.abs(out - u.values)) < 1e-14

    def test_mass_over_many_steps(self):
        spec = GridSpec(1, 64, 20.0)
        u0 = _gauss(spec)
        traj = solver.solve(u0, SolverConfig(lam=1.0, dt=1e-3, T=10.0, record_every=1000))
        m = diag.series("mass", traj, diag.mass)
        assert m.relative_drift() <= 1e-9

    def test_second_order(self):
        spec = GridSpec(1, 128, 30.0)
        base = SolverConfig(lam=1.0, T=0.5)
        r = diag.self_convergence(_gauss(spec), base, [1e-2, 5e-3, 2.5e-3], 1e-2 / 16)
        assert 1.7 <= r["order"] <= 2.2

    def test_lie_is_first_order(self):
        spec = GridSpec(1, 128, 30.0)
        base = SolverConfig(lam=1.0, T=0.5, scheme="lie")
        r = diag.self_convergence(_gauss(spec), base, [1e-2, 5e-3, 2.5e-3], 1e-2 / 16)
        assert 0.8 <= r["order"] <= 1.3

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_step(self):
        spec = GridSpec(1, 16, 4.0)
        W = np.zeros(16)
        W[3] = np.inf
        with pytest.raises(DivergenceError) as exc:
            solver.solve(_gauss(spec), SolverConfig(dt=0.1, T=1.0),
                         PotentialSpec("deterministic", V=W))
        assert exc.value.step == 1
        assert exc.value.last_snapshot is not None


class TestSolve:
    def test_zero_datum(self):
        spec = GridSpec(2, 16, 4.0)
        traj = solver.solve(Field(spec, np.zeros(spec.shape, complex)), SolverConfig(dt=0.01, T=0.1,
                                                                                   record_every=3))
        assert all(not np.any(s.values) for s in traj.snapshots)
        assert traj.times[-1] == pytest.approx(0.1)

    def test_free_gaussian_exact(self):
        spec = GridSpec(1, 256, 40.0)
        traj = solver.solve(_gauss(spec), SolverConfig(lam=0.0, dt=1e-3, T=1.0))
        exact = _free_gaussian(spec.axis(), 1.0)
        assert np.max(np.abs(traj.final().values - exact)) < 1e-8

    def test_records_final_time(self):
        spec = GridSpec(1, 32, 8.0)
        traj = solver.solve(_gauss(spec), SolverConfig(dt=0.01, T=0.25, record_every=10))
        assert traj.times == pytest.approx([0.0, 0.1, 0.2, 0.25])

    def test_deterministic_conservation(self):
        spec = GridSpec(1, 256, 40.0)
        cfg = SolverConfig(lam=1.0, dt=1e-3, T=1.0, record_every=50)
        traj = solver.solve(_gauss(spec), cfg)
        m = diag.series("mass", traj, diag.mass)
        e = diag.series("energy", traj, lambda f: diag.energy_deterministic(f, None, 0.0, 1.0))
        assert m.relative_drift() <= 1e-6
        assert e.relative_drift() <= 1e-6

    def test_observer_sees_recorded_times(self):
        spec = GridSpec(1, 32, 8.0)
        seen = []
        traj = solver.solve(_gauss(spec), SolverConfig(dt=0.01, T=0.1, record_every=5),
                            observer=lambda t, u: seen.append(t))
        assert seen == traj.times

    def test_nonfinite_datum(self):
        spec = GridSpec(1, 16, 4.0)
        a = np.zeros(16, complex)
        a[0] = np.nan
        with pytest.raises(ParameterError):
            solver.solve(Field(spec, a), SolverConfig(dt=0.1, T=0.1))


class TestStar:
    def test_equal_arguments(self):
        assert solver.star_inequality(1 + 2j, 1 + 2j)

    def test_zero_second_argument(self):
        lhs, rhs = solver.star_sides(3 - 1j, 0.0)
        assert lhs == 0.0 and rhs > 0

    def test_sweep(self):
        rng = np.random.default_rng(11)
        n = 1_000_000
        r = 10.0 ** rng.uniform(-8, 3, size=(2, n))
        z, zp = r * np.exp(1j * rng.uniform(0, 2 * np.pi, size=(2, n)))
        assert np.all(solver.star_inequality(z, zp))

    def test_naive_form_agrees_when_well_conditioned(self):
        rng = np.random.default_rng(12)
        z, zp = rng.uniform(0.5, 2, size=(2, 1000)) * np.exp(1j * rng.uniform(0, 6.3, size=(2, 1000)))
        naive = np.abs(np.imag((z * np.log(abs(z) ** 2) - zp * np.log(abs(zp) ** 2)) * np.conj(z - zp)))
        lhs, _ = solver.star_sides(z, zp)
        assert np.allclose(lhs, naive, rtol=1e-9, atol=1e-12)

    def test_study_counts(self):
        r = solver.star_study(10_000, 0, chunk=3000)
        assert r["pairs"] == 10_000 and r["violations"] == 0
        assert 0 < r["max_ratio"] <= 1


class TestUniqueness:
    def test_no_perturbation(self):
        spec = GridSpec(1, 64, 16.0)
        r = solver.uniqueness_probe(_gauss(spec), 0.0, SolverConfig(dt=0.01, T=0.2, record_every=5))
        assert np.all(r["D"] == 0.0) and not r["exceeded"]

    def test_linear_isometry(self):
        spec = GridSpec(1, 64, 16.0)
        r = solver.uniqueness_probe(_gauss(spec), 0.1, SolverConfig(lam=0.0, dt=0.01, T=0.5,
                                                                    record_every=5))
        assert np.max(np.abs(r["D"] - r["D"][0])) <= 1e-10 * r["D"][0]

    def test_negative_size(self):
        spec = GridSpec(1, 16, 4.0)
        with pytest.raises(ParameterError):
            solver.uniqueness_probe(_gauss(spec), -1.0, SolverConfig(dt=0.1, T=0.1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(0, 1), st.floats(1e-4, 0.1))
def test_step_is_isometric(seed, lam, delta, dt):
    spec = GridSpec(1, 32, 6.0)
    u = _rand(spec, seed)
    W = np.random.default_rng(seed + 1).standard_normal(32)
    out = Stepper(spec, W, lam, delta, dt).step(u.values)
    assert abs(diag.mass(out, spec) / diag.mass(u) - 1) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_star_property(z, zp):
    assert solver.star_inequality(z, zp)
