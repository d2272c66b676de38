import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metrics import conjugate_beamformers, dl_sinr
from models import ExposureLimits, FeasibilityStatus, NetworkConfig
from power_control import build_dl_problem, linearize_desired, sco_subproblem, solve_dl_maxmin
from power_control.dl_opt import initial_amplitudes, sinr_upper_bound


def single_ap_problem():
    """Two users sharing one single-antenna AP."""
    config = NetworkConfig(num_users=2, num_aps=1, antennas_per_ap=1, association_size=1)
    channels = np.array([[[1.5e-6]], [[0.8e-6 * np.exp(0.3j)]]])
    association = np.ones((2, 1), dtype=int)
    beams = conjugate_beamformers(channels, association).dl_beams
    data = build_dl_problem(channels, beams, association,
                            ExposureLimits.unconstrained(2), config)
    return config, channels, beams, association, data


def shared_ap_optimum(channels, config):
    """Equal-SINR point at full budget: gamma / (1 - gamma) = P / sum_k sigma^2 / |h_k|^2."""
    gains = np.abs(channels[:, 0, 0]) ** 2 / config.noise_power
    ratio = config.dl_power_budget / np.sum(1.0 / gains)
    return ratio / (1.0 + ratio)


def random_shared_ap(rng, ipd_fraction=None):
    """Two users on one single-antenna AP; IPD caps (if any) limit the total power to a fraction."""
    config = NetworkConfig(num_users=2, num_aps=1, antennas_per_ap=1, association_size=1)
    magnitudes = rng.uniform(0.8e-6, 1.6e-6, 2)
    channels = (magnitudes * np.exp(1j * rng.uniform(0.0, 2 * np.pi, 2))).reshape(2, 1, 1)
    association = np.ones((2, 1), dtype=int)
    beams = conjugate_beamformers(channels, association).dl_beams
    if ipd_fraction is None:
        limits = ExposureLimits.unconstrained(2)
    else:
        full_ipd = 4 * np.pi / config.wavelength ** 2 * magnitudes ** 2 * config.dl_power_budget
        limits = ExposureLimits(ipd_caps=ipd_fraction * full_ipd,
                                sar_caps=np.full((2, 1), np.inf),
                                sar_coeffs=np.ones((2, 1)))
    data = build_dl_problem(channels, beams, association, limits, config)
    return config, magnitudes, data


def shared_ap_grid(config, magnitudes, steps=400):
    """Max-min SINR over the budget triangle at P / steps spacing."""
    gains = magnitudes ** 2 / config.noise_power
    index = np.arange(steps + 1)
    first, second = np.meshgrid(index, index, indexing='ij')
    inside = first + second <= steps
    p1 = first[inside] * config.dl_power_budget / steps
    p2 = second[inside] * config.dl_power_budget / steps
    sinr1 = gains[0] * p1 / (gains[0] * p2 + 1.0)
    sinr2 = gains[1] * p2 / (gains[1] * p1 + 1.0)
    return float(np.max(np.minimum(sinr1, sinr2)))


def single_user_problem(ipd_cap=np.inf):
    config = NetworkConfig(num_users=1, num_aps=2, antennas_per_ap=1, association_size=2)
    channels = np.array([[[1e-6], [2e-6j]]])
    association = np.ones((1, 2), dtype=int)
    beams = conjugate_beamformers(channels, association).dl_beams
    limits = ExposureLimits.uniform(1, ipd_cap=ipd_cap, sar_cap=np.inf)
    return config, build_dl_problem(channels, beams, association, limits, config)


class TestSingleUser:
    def test_budget_only(self):
        config, data = single_user_problem()
        expected = 9e-12 * config.dl_power_budget / config.noise_power
        solution = solve_dl_maxmin(data, tol_bisect=1e-9)
        assert solution.gamma == pytest.approx(expected, rel=1e-5)
        assert solution.powers == pytest.approx(np.full((1, 2), config.dl_power_budget), rel=1e-4)

    def test_ipd_cap_binds(self):
        config, unconstrained = single_user_problem()
        full_ipd = float(unconstrained.ipd(initial_amplitudes(unconstrained))[0])
        cap = full_ipd / 4.0

        _, data = single_user_problem(ipd_cap=cap)
        solution = solve_dl_maxmin(data, tol_bisect=1e-9)
        expected = 9e-12 * config.dl_power_budget / config.noise_power / 4.0
        assert solution.gamma == pytest.approx(expected, rel=1e-4)
        assert data.ipd(data.from_powers(solution.powers))[0] <= cap * (1 + 1e-5)

    def test_start_meets_the_ipd_cap(self):
        _, unconstrained = single_user_problem()
        full_ipd = float(unconstrained.ipd(initial_amplitudes(unconstrained))[0])
        _, data = single_user_problem(ipd_cap=full_ipd / 9.0)
        start = initial_amplitudes(data)
        assert data.ipd(start)[0] == pytest.approx(full_ipd / 9.0)


class TestSharedAccessPoint:
    def test_reaches_equal_sinr_optimum(self):
        config, channels, beams, association, data = single_ap_problem()
        optimum = shared_ap_optimum(channels, config)

        solution = solve_dl_maxmin(data, tol_sco=1e-6, tol_bisect=1e-8, max_outer=200)
        assert solution.status is FeasibilityStatus.FEASIBLE
        assert solution.gamma >= 0.98 * optimum
        assert solution.gamma <= optimum * (1 + 1e-4)
        assert solution.powers.sum() <= config.dl_power_budget * (1 + 1e-5)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(20))
    def test_matches_a_power_grid(self, seed):
        config, magnitudes, data = random_shared_ap(np.random.default_rng(300 + seed))
        solution = solve_dl_maxmin(data, tol_sco=1e-6, tol_bisect=1e-8, max_outer=200)
        grid = shared_ap_grid(config, magnitudes)
        assert solution.status is FeasibilityStatus.FEASIBLE
        assert solution.gamma == pytest.approx(grid, rel=1e-2)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 0.8))
    def test_relaxing_ipd_caps_never_lowers_gamma(self, seed, fraction):
        _, _, capped = random_shared_ap(np.random.default_rng(seed), ipd_fraction=fraction)
        _, _, relaxed = random_shared_ap(np.random.default_rng(seed))
        tight = solve_dl_maxmin(capped, tol_sco=1e-6, tol_bisect=1e-8, max_outer=200)
        loose = solve_dl_maxmin(relaxed, tol_sco=1e-6, tol_bisect=1e-8, max_outer=200)
        assert loose.gamma >= tight.gamma
        assert np.all(capped.ipd(capped.from_powers(tight.powers)) <= capped.ipd_caps * (1 + 1e-5))

    def test_matches_direct_sinr(self):
        config, channels, beams, association, data = single_ap_problem()
        solution = solve_dl_maxmin(data)
        direct = dl_sinr(channels, beams, association, solution.powers, config.noise_power)
        assert np.min(direct) == pytest.approx(solution.gamma, rel=1e-9)

    def test_bisection_outer_nesting(self):
        config, channels, _, _, data = single_ap_problem()
        optimum = shared_ap_optimum(channels, config)
        solution = solve_dl_maxmin(data, tol_bisect=1e-6, max_outer=200,
                                   nesting="bisection_outer")
        assert solution.gamma >= 0.9 * optimum
        assert solution.powers.sum() <= config.dl_power_budget * (1 + 1e-5)

    def test_unknown_nesting(self):
        *_, data = single_ap_problem()
        with pytest.raises(ValueError):
            solve_dl_maxmin(data, nesting="alternating")


class TestSuccessiveConvexOptimization:
    @pytest.fixture
    def problem(self, estimated_channels, small_scenario):
        config = small_scenario.config
        beams = conjugate_beamformers(estimated_channels.estimates, small_scenario.association)
        return build_dl_problem(estimated_channels.estimates, beams.dl_beams,
                                small_scenario.association,
                                ExposureLimits.uniform(config.num_users), config)

    def test_trace_never_decreases(self, problem):
        solution = solve_dl_maxmin(problem)
        gammas = [row[1] for row in solution.trace]
        assert solution.trace[0][0] == 0
        assert np.all(np.diff(gammas) >= -1e-9)
        assert solution.gamma >= gammas[0] - 1e-9

    def test_budgets_respected(self, problem, small_scenario):
        solution = solve_dl_maxmin(problem)
        per_ap = solution.powers.sum(axis=0)
        assert np.all(per_ap <= problem.budgets * (1 + 1e-5))
        assert np.all(solution.powers[small_scenario.association == 0] == 0)

    def test_improves_on_the_uniform_start(self, problem):
        start = initial_amplitudes(problem)
        solution = solve_dl_maxmin(problem)
        assert solution.gamma >= np.min(problem.sinr(start)) - 1e-9
        assert solution.gamma <= sinr_upper_bound(problem) * (1 + 1e-5)

    def test_subproblem_accepts_its_expansion_point(self, problem):
        start = initial_amplitudes(problem)
        target = 0.999 * float(np.min(problem.sinr(start)))
        result = sco_subproblem(problem, start, target)
        assert result.feasible
        assert np.array_equal(result.point, start)

    def test_subproblem_rejects_unreachable_target(self, problem):
        start = initial_amplitudes(problem)
        result = sco_subproblem(problem, start, 10.0 * sinr_upper_bound(problem))
        assert not result.feasible


class TestLinearization:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_is_a_global_minorant(self, seed):
        rng = np.random.default_rng(seed)
        gains = rng.normal(size=4) + 1j * rng.normal(size=4)
        previous = rng.uniform(0.0, 2.0, 4)
        value, gradient = linearize_desired(previous, gains)
        for _ in range(20):
            point = rng.uniform(0.0, 3.0, 4)
            exact = np.abs(gains @ point) ** 2
            assert exact >= value + gradient @ (point - previous) - 1e-9 * (1 + exact)

    def test_exact_at_the_expansion_point(self, rng):
        gains = rng.normal(size=3) + 1j * rng.normal(size=3)
        previous = rng.uniform(0.1, 1.0, 3)
        value, _ = linearize_desired(previous, gains)
        assert value == pytest.approx(np.abs(gains @ previous) ** 2)

    def test_gradient_matches_finite_differences(self, rng):
        gains = rng.normal(size=3) + 1j * rng.normal(size=3)
        previous = rng.uniform(0.1, 1.0, 3)
        _, gradient = linearize_desired(previous, gains)

        step = 1e-6
        numeric = np.array([
            (np.abs(gains @ (previous + step * e)) ** 2
             - np.abs(gains @ (previous - step * e)) ** 2) / (2 * step)
            for e in np.eye(3)
        ])
        assert np.linalg.norm(numeric - gradient) <= 1e-6 * np.linalg.norm(gradient)
