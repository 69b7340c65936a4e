import numpy as np
import pytest

from anelastic_lab.acoustic import (
    AcousticState,
    FrequencyWindow,
    acoustic_energy,
    admissible_pair,
    assemble_operator,
    crossing_time,
    dispersive_smallness,
    evolve_acoustic,
    functional_calculus,
    leapfrog_max_dt,
    measure_local_decay,
    measure_strichartz,
    regularize_data,
    spatial_cutoff,
    spectral_solution,
)
from anelastic_lab.grids import CFLError, DomainError, Grid, lp_norm
from anelastic_lab.hydrostatics import constant_profile
from anelastic_lab.primitive import GaussianBump


@pytest.fixture(scope="module")
def flat_operator(params):
    grid = Grid("radial", 512, 10.0, 7.5)
    return assemble_operator(constant_profile(params, grid))


class TestOperator:
    def test_constant_coefficient_eigenvalues(self, flat_operator, params):
        R = flat_operator.grid.r_max
        for n_mode in range(1, 6):
            exact = params.gamma * (n_mode * np.pi / R) ** 2
            rel = abs(flat_operator.evals[n_mode - 1] - exact) / exact
            assert rel < 5.0e-3

    def test_self_adjointness(self, operator, rng):
        u = rng.standard_normal(operator.grid.n)
        v = rng.standard_normal(operator.grid.n)
        defect = abs(operator.inner(operator.apply(u), v) - operator.inner(u, operator.apply(v)))
        assert defect <= 1.0e-10 * operator.norm(u) * operator.norm(v)

    def test_nonnegative_spectrum(self, operator):
        assert operator.evals[0] >= -1.0e-8 * operator.evals[-1]
        assert operator.evals[0] > 0.0  # Dirichlet wall keeps a gap

    def test_rayleigh_quotient_nonnegative(self, operator):
        v = np.ones(operator.grid.n)
        v[-operator.grid.n // 8 :] = 0.0
        assert operator.inner(operator.apply(v), v) >= 0.0

    def test_eigenvector_orthonormality(self, operator):
        gram = operator.evecs.T @ (operator.masses[:, None] * operator.evecs)
        assert np.max(np.abs(gram - np.eye(operator.grid.n))) < 1.0e-8

    def test_eager_limit(self, params):
        grid = Grid("radial", 5000, 10.0, 7.5)
        with pytest.raises(DomainError):
            assemble_operator(constant_profile(params, grid))


class TestFunctionalCalculus:
    def test_identity(self, operator, rng):
        h = rng.standard_normal(operator.grid.n)
        out = functional_calculus(operator, 1.0, h)
        assert lp_norm(out - h, 2.0, operator.grid) < 1.0e-8 * lp_norm(h, 2.0, operator.grid)

    def test_zero(self, operator, rng):
        h = rng.standard_normal(operator.grid.n)
        assert np.max(np.abs(functional_calculus(operator, 0.0, h))) == 0.0

    def test_single_mode_projection(self, operator, rng):
        h = rng.standard_normal(operator.grid.n)
        k = 3
        w3 = operator.omegas[k]
        gap = min(operator.omegas[k] - operator.omegas[k - 1], operator.omegas[k + 1] - w3)
        window = lambda z: 1.0 * (np.abs(z - w3) < 0.5 * gap)  # noqa: E731
        out = functional_calculus(operator, window, h)
        direct = operator.inner(h, operator.evecs[:, k]) * operator.evecs[:, k]
        assert np.max(np.abs(out - direct)) < 1.0e-10 * np.max(np.abs(direct))

    def test_window_shape(self):
        win = FrequencyWindow(0.25)
        assert win(np.array([0.25]))[0] == pytest.approx(1.0)
        assert win(np.array([4.0]))[0] == pytest.approx(1.0)
        assert win(np.array([0.124]))[0] == 0.0
        assert win(np.array([8.1]))[0] == 0.0
        assert win(np.array([-1.0]))[0] == win(np.array([1.0]))[0]

    def test_window_near_idempotence(self, operator, rng):
        # applying a 0/1-like window twice differs from once only on the
        # shoulders, bounded by max |G - G^2| = 1/4
        win = FrequencyWindow(0.25)
        h = rng.standard_normal(operator.grid.n)
        once = functional_calculus(operator, win, h)
        twice = functional_calculus(operator, win, once)
        defect = operator.norm(twice - once)
        assert defect <= 0.25 * operator.norm(h) + 1.0e-12


class TestRegularization:
    def test_plateau_fixed_point(self, operator):
        # delta small enough that the spatial cutoff is one on the whole
        # grid; data built from plateau modes must come back unchanged
        delta = 0.05
        assert 1.0 / delta >= operator.grid.r_max
        omegas = operator.omegas
        sel = (omegas > 0.1) & (omegas < 10.0)
        coeffs = np.zeros(operator.grid.n)
        coeffs[sel] = np.linspace(1.0, 0.1, int(np.count_nonzero(sel)))
        sigma = operator.reconstruct(coeffs)
        rho1 = operator.prof.rho0 / operator.prof.dp * sigma
        s0, _ = regularize_data(operator, rho1, np.zeros_like(rho1), delta)
        assert lp_norm(s0 - rho1, 2.0, operator.grid) < 1.0e-8 * lp_norm(rho1, 2.0, operator.grid)

    def test_delta_sequence_converges(self, operator):
        grid = operator.grid
        rho1 = GaussianBump(1.0, 1.2).field(grid)
        errors = []
        for delta in (0.5, 0.25, 0.125):
            s0, _ = regularize_data(operator, rho1, np.zeros_like(rho1), delta)
            errors.append(lp_norm(s0 - rho1, 2.0, grid))
        assert errors[0] > errors[1] > errors[2]

    def test_zero_data(self, operator):
        z = np.zeros(operator.grid.n)
        s0, phi0 = regularize_data(operator, z, z, 0.25)
        assert np.max(np.abs(s0)) == 0.0 and np.max(np.abs(phi0)) == 0.0

    def test_spatial_cutoff_shape(self, operator):
        psi = spatial_cutoff(0.25, operator.grid)
        r = operator.grid.radii
        assert np.all(psi[r < 4.0] == 1.0)
        assert np.all(psi[r > 8.0] == 0.0)


class TestEvolution:
    def test_single_mode_period(self, operator):
        eps = 0.2
        k = 0
        lam = operator.evals[k]
        sigma0 = operator.evecs[:, k]
        s0 = operator.prof.inner_weight * sigma0
        sol = spectral_solution(operator, AcousticState(s=s0, phi=np.zeros_like(s0)), eps)
        period = 2.0 * np.pi * eps / np.sqrt(lam)
        probe = np.argmax(np.abs(s0))
        for cycles in (1, 3):
            v0 = sol.s(0.0)[probe]
            v1 = sol.s(cycles * period)[probe]
            assert abs(v1 - v0) < 1.0e-3 * abs(v0)
        # a quarter period away the coefficient passes through zero
        assert abs(sol.sigma_coeffs(0.25 * period)[k]) < 1.0e-10

    def test_zero_data(self, operator):
        z = np.zeros(operator.grid.n)
        traj = evolve_acoustic(AcousticState(s=z, phi=z), operator, 0.2, 1.0, n_samples=5)
        assert all(np.max(np.abs(st.s)) == 0.0 for st in traj.states)

    def test_energy_conservation_spectral(self, operator):
        grid = operator.grid
        init = AcousticState(
            s=GaussianBump(1.0, 1.0).field(grid), phi=0.3 * GaussianBump(1.0, 2.0).field(grid)
        )
        horizon = 10.0 * crossing_time(operator.prof, grid)
        traj = evolve_acoustic(init, operator, 0.2, horizon, n_samples=41)
        drift = np.max(np.abs(traj.energies - traj.energies[0]))
        assert drift <= 1.0e-6 * traj.energies[0]

    def test_front_speed_constant_background(self, flat_operator, params):
        # d'Alembert oracle: peak of r * s moves at sqrt(gamma)
        grid = flat_operator.grid
        init = AcousticState(s=GaussianBump(1.0, 0.4).field(grid), phi=np.zeros(grid.n))
        sol = spectral_solution(flat_operator, init, 1.0)
        r = grid.centers

        def front(t):
            y = r * np.abs(sol.s(t))
            mask = r > 1.0
            idx = np.argmax(y[mask])
            return r[mask][idx]

        t1, t2 = 2.0, 6.0
        speed = (front(t2) - front(t1)) / (t2 - t1)
        target = np.sqrt(params.gamma)
        assert abs(speed - target) / target < 0.02

    def test_rescaling_exactness(self, operator, rng):
        init = AcousticState(
            s=rng.standard_normal(operator.grid.n), phi=rng.standard_normal(operator.grid.n)
        )
        sol_eps = spectral_solution(operator, init, 0.2)
        sol_one = spectral_solution(operator, init, 1.0)
        t = 0.7
        assert np.array_equal(sol_eps.phi(t), sol_one.phi(t / 0.2))
        assert np.array_equal(sol_eps.s(t), sol_one.s(t / 0.2))

    def test_leapfrog_energy_drift_second_order(self, operator):
        grid = operator.grid
        init = AcousticState(s=GaussianBump(1.0, 1.0).field(grid), phi=np.zeros(grid.n))
        eps = 0.5
        dt0 = 0.25 * leapfrog_max_dt(operator, eps)
        drifts = []
        for dt in (dt0, 0.5 * dt0):
            traj = evolve_acoustic(
                init, operator, eps, 0.5, n_samples=11, method="leapfrog", dt=dt
            )
            drifts.append(np.max(np.abs(traj.energies - traj.energies[0])))
        rate = np.log2(drifts[0] / drifts[1])
        assert abs(rate - 2.0) <= 0.2

    def test_leapfrog_cfl_rejection(self, operator):
        grid = operator.grid
        init = AcousticState(s=np.ones(grid.n), phi=np.zeros(grid.n))
        with pytest.raises(CFLError):
            evolve_acoustic(
                init,
                operator,
                0.2,
                0.1,
                method="leapfrog",
                dt=3.0 * leapfrog_max_dt(operator, 0.2),
            )


class TestMeasurements:
    def window_and_datum(self, operator):
        win = FrequencyWindow(0.3)
        h = functional_calculus(operator, win, GaussianBump(1.0, 0.75).field(operator.grid))
        return win, h / operator.norm(h)

    def test_annihilated_data(self, operator):
        win = FrequencyWindow(0.3)
        high = lambda z: 1.0 * (z > 2.5 / 0.3)  # noqa: E731
        h = functional_calculus(operator, high, GaussianBump(1.0, 0.3).field(operator.grid))
        m = measure_local_decay(operator, win, 2.5, h, 5.0)
        assert m.value < 1.0e-10

    def test_saturation(self, operator):
        win, h = self.window_and_datum(operator)
        t_star = crossing_time(operator.prof, operator.grid)
        m1 = measure_local_decay(operator, win, 2.5, h, t_star)
        m2 = measure_local_decay(operator, win, 2.5, h, 2.0 * t_star)
        assert m2.value / m1.value <= 1.05

    def test_quadratic_homogeneity(self, operator):
        win, h = self.window_and_datum(operator)
        m1 = measure_local_decay(operator, win, 2.5, h, 3.0)
        m2 = measure_local_decay(operator, win, 2.5, 2.0 * h, 3.0)
        assert m2.value == pytest.approx(4.0 * m1.value, rel=1.0e-12)

    def test_admissibility(self):
        assert admissible_pair(4.0, 12.0)
        assert not admissible_pair(4.0, 10.0)

    def test_strichartz_rejects_inadmissible(self, operator):
        win, h = self.window_and_datum(operator)
        with pytest.raises(DomainError):
            measure_strichartz(operator, win, h, 4.0, 10.0, 1.0)

    def test_strichartz_zero_data(self, operator):
        win = FrequencyWindow(0.3)
        m = measure_strichartz(operator, win, np.zeros(operator.grid.n), 4.0, 12.0, 1.0)
        assert m.value == 0.0

    def test_constant_stability(self, operator):
        win = FrequencyWindow(0.3)
        t_star = crossing_time(operator.prof, operator.grid)
        ratios = []
        for width, center in ((0.6, 0.0), (1.2, 0.0), (0.9, 1.5)):
            h = functional_calculus(
                operator, win, GaussianBump(1.0, width, center).field(operator.grid)
            )
            h = h / operator.norm(h)
            ratios.append(measure_strichartz(operator, win, h, 4.0, 12.0, t_star).ratio)
        assert max(ratios) / min(ratios) <= 10.0

    def test_dispersive_smallness_monotone(self, operator):
        win = FrequencyWindow(0.3)
        h = functional_calculus(operator, win, GaussianBump(1.0, 0.6).field(operator.grid))
        h = h / operator.norm(h)
        vals = [dispersive_smallness(operator, win, h, 1.5, 0.9, eps) for eps in (0.4, 0.2, 0.1)]
        assert vals[0] > vals[1] > vals[2]


def test_acoustic_energy_matches_solution(operator, rng):
    init = AcousticState(
        s=rng.standard_normal(operator.grid.n), phi=rng.standard_normal(operator.grid.n)
    )
    sol = spectral_solution(operator, init, 0.3)
    direct = acoustic_energy(operator, init.s, init.phi)
    assert direct == pytest.approx(sol.energy(0.0), rel=1.0e-12)
