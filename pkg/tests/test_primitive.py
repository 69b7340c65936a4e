import numpy as np
import pytest

from anelastic_lab.grids import CFLError, Grid, integrate, lp_norm
from anelastic_lab.hydrostatics import PotentialSpec, build_profile, constant_profile
from anelastic_lab.params import ParameterError, ScalingParams
from anelastic_lab.primitive import (
    CappedPower,
    DataError,
    GaussianBump,
    IllPreparedData,
    PrimitiveState,
    SolverFailure,
    init_ill_prepared,
    read_checkpoint,
    renorm_check,
    run_primitive,
    step_primitive,
    suggested_dt,
    total_energy,
    write_checkpoint,
)

EPS02 = ScalingParams(eps=0.2, horizon=1.0)


def acoustic_data(amp=0.4):
    return IllPreparedData(
        rho1=GaussianBump(amp, 1.2),
        vel_potential=GaussianBump(amp, 1.5),
        theta2=GaussianBump(amp, 1.2),
    )


class TestScalingParams:
    def test_hypothesis_range_enforced(self):
        with pytest.raises(ParameterError):
            ScalingParams(gamma=1.4)
        with pytest.raises(ParameterError):
            ScalingParams(alpha=1.5)

    def test_warn_only(self):
        with pytest.warns(UserWarning):
            ScalingParams(gamma=1.4, warn_only=True)

    def test_with_eps(self):
        p = EPS02.with_eps(0.1)
        assert p.eps == 0.1 and p.gamma == EPS02.gamma


class TestInit:
    def test_equilibrium(self, radial_profile, radial_grid):
        state = init_ill_prepared(IllPreparedData(), radial_profile, EPS02, radial_grid)
        assert np.array_equal(state.rho, radial_profile.rho0)
        assert np.all(state.mom == 0.0)
        assert np.array_equal(state.q, radial_profile.rho0)

    def test_bump_mass(self, radial_profile, radial_grid):
        data = IllPreparedData(rho1=GaussianBump.from_mass(0.2, 1.0))
        params = ScalingParams(eps=0.1, horizon=1.0)
        state = init_ill_prepared(data, radial_profile, params, radial_grid)
        added = integrate(state.rho - radial_profile.rho0, radial_grid)
        assert abs(added - 0.02) < 1.0e-4

    def test_theta_scaling_exact(self, radial_profile, radial_grid):
        data = IllPreparedData(theta2=GaussianBump(0.7, 1.0))
        params = ScalingParams(eps=0.1, horizon=1.0)
        state = init_ill_prepared(data, radial_profile, params, radial_grid)
        expected = 0.1**2 * lp_norm(data.theta2.field(radial_grid), np.inf, radial_grid)
        assert lp_norm(state.theta - 1.0, np.inf, radial_grid) == pytest.approx(
            expected, rel=1.0e-12
        )

    def test_negative_density_rejected(self, radial_profile, radial_grid):
        data = IllPreparedData(rho1=GaussianBump(-30.0, 1.0))
        with pytest.raises(DataError):
            init_ill_prepared(data, radial_profile, EPS02, radial_grid)

    def test_declared_bounds_checked(self, radial_grid):
        data = IllPreparedData(rho1=GaussianBump(2.0, 1.0), linf_bound=1.0)
        with pytest.raises(DataError):
            data.check_bounds(radial_grid, 0.2)

    def test_vacuum_guard(self):
        state = PrimitiveState(
            rho=np.array([1.0, 1.0e-13, 0.5]),
            mom=np.zeros(3),
            q=np.array([1.0, 3.0e-13, 0.4]),
        )
        th = state.theta
        assert th[1] == 1.0
        assert th[2] == pytest.approx(0.8)


class TestStep:
    def test_static_state_is_exact_fixed_point(self, radial_profile, radial_grid):
        state = PrimitiveState(
            rho=radial_profile.rho0.copy(),
            mom=np.zeros(radial_grid.n),
            q=radial_profile.rho0.copy(),
        )
        dt = suggested_dt(state, radial_profile, EPS02, radial_grid)
        out = step_primitive(state, radial_profile, EPS02, dt, radial_grid)
        assert np.array_equal(out.rho, radial_profile.rho0)
        assert np.all(out.mom == 0.0)
        assert np.array_equal(out.q, radial_profile.rho0)

    def test_uniform_state_without_gravity_stationary(self, radial_grid):
        prof = constant_profile(EPS02, radial_grid)
        state = PrimitiveState(
            rho=np.ones(radial_grid.n), mom=np.zeros(radial_grid.n), q=np.ones(radial_grid.n)
        )
        out = step_primitive(state, prof, EPS02, 1.0e-4, radial_grid)
        assert np.array_equal(out.rho, state.rho)
        assert np.all(out.mom == 0.0)

    def test_cfl_rejection(self, radial_profile, radial_grid):
        state = init_ill_prepared(acoustic_data(), radial_profile, EPS02, radial_grid)
        dt = 10.0 * suggested_dt(state, radial_profile, EPS02, radial_grid)
        with pytest.raises(CFLError):
            step_primitive(state, radial_profile, EPS02, dt, radial_grid)

    def test_validate_rejects_negative(self):
        state = PrimitiveState(rho=np.array([1.0, -0.1]), mom=np.zeros(2), q=np.ones(2))
        with pytest.raises(SolverFailure):
            state.validate()


@pytest.fixture(scope="module")
def short_run(radial_profile, radial_grid):
    init = init_ill_prepared(acoustic_data(), radial_profile, EPS02, radial_grid)
    return run_primitive(init, radial_profile, EPS02, radial_grid, np.linspace(0.0, 1.0, 11))


@pytest.fixture(scope="module")
def renorm_traj(radial_profile, radial_grid):
    init = init_ill_prepared(acoustic_data(), radial_profile, EPS02, radial_grid)
    return run_primitive(init, radial_profile, EPS02, radial_grid, np.linspace(0.0, 0.5, 26))


class TestRun:
    def test_interior_conservation(self, short_run):
        t = short_run
        for series, outflow, sponge in (
            (t.mass, t.outer_mass_flux, t.sponge_mass),
            (t.q_mass, t.outer_q_flux, t.sponge_q),
        ):
            defect = series[-1] - series[0] + outflow[-1] + sponge[-1]
            assert abs(defect) < 1.0e-9 * series[0]

    def test_energy_monotone(self, short_run):
        tol = 1.0e-3 * short_run.energy[0]
        assert np.all(np.diff(short_run.energy) <= tol)

    def test_static_energy_zero(self, radial_profile, radial_grid):
        init = PrimitiveState(
            rho=radial_profile.rho0.copy(),
            mom=np.zeros(radial_grid.n),
            q=radial_profile.rho0.copy(),
        )
        traj = run_primitive(
            init, radial_profile, EPS02, radial_grid, np.array([0.0, 0.5, 1.0])
        )
        assert np.max(np.abs(traj.energy)) < 1.0e-10

    def test_pure_velocity_bump_energy_decreases(self, radial_profile, radial_grid):
        data = IllPreparedData(vel_potential=GaussianBump(0.5, 1.5))
        init = init_ill_prepared(data, radial_profile, EPS02, radial_grid)
        traj = run_primitive(
            init, radial_profile, EPS02, radial_grid, np.linspace(0.0, 0.6, 7)
        )
        assert np.all(np.diff(traj.energy) <= 1.0e-3 * traj.energy[0])

    def test_well_balancing_refinement(self, params):
        drifts = []
        for n in (128, 256):
            g = Grid("radial", n, 16.0, 12.0)
            prof = build_profile(PotentialSpec(), EPS02, g)
            init = PrimitiveState(rho=prof.rho0.copy(), mom=np.zeros(n), q=prof.rho0.copy())
            traj = run_primitive(init, prof, EPS02, g, np.array([0.0, 0.5]))
            drifts.append(lp_norm(traj.states[-1].rho - prof.rho0, np.inf, g))
        # the equilibrium-variable dissipation keeps the state exact, which
        # satisfies the O(h^2) drift bound trivially
        for n, drift in zip((128, 256), drifts):
            assert drift <= 1.0 * (16.0 / n) ** 2

    def test_muscl_reduces_smearing(self, radial_grid):
        params = ScalingParams(eps=1.0, mu=0.0, horizon=3.0)
        prof = constant_profile(params, radial_grid)
        bump = GaussianBump(1.0e-3, 0.5)
        init = PrimitiveState(
            rho=prof.rho0 + bump.field(radial_grid),
            mom=np.zeros(radial_grid.n),
            q=prof.rho0 + bump.field(radial_grid),
        )
        times = np.array([0.0, 3.0])
        amp = {}
        for muscl in (False, True):
            traj = run_primitive(init, prof, params, radial_grid, times, muscl=muscl)
            amp[muscl] = lp_norm(traj.states[-1].rho - prof.rho0, np.inf, radial_grid)
        assert amp[True] > amp[False]


class TestEnergyFunctional:
    def test_gamma_two_integrand_value(self, radial_grid):
        # q = 1.2, rho0 = 1, eps^2 = 0.01: bracket (q - rho0)^2 / eps^2 = 4
        params = ScalingParams(eps=0.1, gamma=2.0, horizon=1.0)
        prof = constant_profile(params, radial_grid)
        state = PrimitiveState(
            rho=np.ones(radial_grid.n),
            mom=np.zeros(radial_grid.n),
            q=np.full(radial_grid.n, 1.2),
        )
        val = total_energy(state, prof, params, radial_grid)
        per_volume = val / radial_grid.volume
        # bracket = H(1.2) - H'(1)(0) - H(1) = 1.44 - 1 = 0.44 over eps^2
        assert per_volume == pytest.approx(44.0, rel=1.0e-12)


class TestRenormalization:
    def test_linear_b_reduces_to_conservation(self, renorm_traj, radial_grid):
        b = CappedPower(power=1.0, cap=50.0, blend_width=1.0)
        rep = renorm_check(renorm_traj, b, radial_grid)
        assert rep.max_defect < 5.0e-3

    def test_constant_b(self, renorm_traj, radial_grid):
        class ConstantB:
            def b(self, y):
                return np.full_like(np.asarray(y, dtype=float), 2.0)

            def db(self, y):
                return np.zeros_like(np.asarray(y, dtype=float))

        rep = renorm_check(renorm_traj, ConstantB(), radial_grid)
        assert rep.max_defect < 5.0e-3

    def test_quadratic_refinement(self):
        defects = []
        for n in (96, 192):
            g = Grid("radial", n, 16.0, 12.0)
            prof = build_profile(PotentialSpec(), EPS02, g)
            init = init_ill_prepared(acoustic_data(), prof, EPS02, g)
            traj = run_primitive(init, prof, EPS02, g, np.linspace(0.0, 0.4, 33))
            b = CappedPower(power=2.0, cap=2.0 * prof.rho_max, blend_width=0.5)
            defects.append(renorm_check(traj, b, g).max_defect)
        assert defects[0] / defects[1] >= 1.8

    def test_capped_power_derivative_support(self):
        b = CappedPower(power=2.0, cap=3.0, blend_width=0.5)
        y = np.linspace(0.0, 6.0, 200)
        db = b.db(y)
        assert np.all(db[y >= 3.5] == 0.0)
        # C^1 continuity at the blend edges
        assert abs(b.db(np.array([3.0 - 1e-9]))[0] - b.db(np.array([3.0 + 1e-9]))[0]) < 1e-6
        assert b.db(np.array([3.5 - 1e-9]))[0] < 1e-6


def test_checkpoint_roundtrip(tmp_path, radial_profile, radial_grid):
    init = init_ill_prepared(acoustic_data(), radial_profile, EPS02, radial_grid)
    path = str(tmp_path / "state.bin")
    write_checkpoint(path, init, radial_grid, EPS02)
    state, meta = read_checkpoint(path)
    assert np.array_equal(state.rho, init.rho)
    assert np.array_equal(state.mom, init.mom)
    assert np.array_equal(state.q, init.q)
    assert meta["geometry"] == "radial"
    assert float(meta["eps"]) == EPS02.eps
