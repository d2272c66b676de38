import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metrics import conjugate_beamformers, sar, ul_sinr
from models import (
    DegenerateLinkError, ExposureLimits, FeasibilityStatus, NetworkConfig, ValidationError,
)
from power_control import UlGainTable, build_gain_table, solve_ul_maxmin, ul_feasible

CONFIG = NetworkConfig()


def random_table(rng, num_users):
    cross = rng.uniform(0.0, 0.3, (num_users, num_users))
    np.fill_diagonal(cross, 0.0)
    return UlGainTable(
        desired=rng.uniform(0.5, 2.0, num_users),
        cross=cross,
        noise=rng.uniform(0.01, 0.1, num_users),
        caps=rng.uniform(0.5, 1.0, num_users),
    )


def reachable(target, table, slack=1e-9):
    """Independent check: least powers meeting the target from the linear system."""
    a = target * table.cross / table.desired[:, None]
    if np.max(np.abs(np.linalg.eigvals(a))) >= 1:
        return False
    powers = np.linalg.solve(np.eye(table.num_users) - a, target * table.noise / table.desired)
    return bool(np.all(powers >= 0) and np.all(powers <= table.caps * (1 + slack)))


def min_sinr(table, points):
    interference = points @ table.cross.T + table.noise
    return np.min(points * table.desired / interference, axis=1)


def grid_maxmin(table, steps):
    """Best min-SINR over the box [0, q_max] at q_max / steps spacing, with its argmax."""
    axes = [np.linspace(0.0, cap, steps + 1) for cap in table.caps]
    rest = np.stack(np.meshgrid(*axes[1:], indexing='ij'), axis=-1).reshape(-1, table.num_users - 1)
    best, best_point = -np.inf, None
    for first in axes[0]:
        points = np.column_stack([np.full(len(rest), first), rest])
        values = min_sinr(table, points)
        index = int(np.argmax(values))
        if values[index] > best:
            best, best_point = float(values[index]), points[index]
    return best, best_point


def refine_maxmin(table, point, step, rounds=8, points_per_axis=21):
    """Shrinking grid search around an incumbent point (min-SINR is quasiconcave)."""
    best = float(min_sinr(table, point[None, :])[0])
    for _ in range(rounds):
        axes = [np.clip(np.linspace(p - 2 * s, p + 2 * s, points_per_axis), 0.0, cap)
                for p, s, cap in zip(point, step, table.caps)]
        grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, table.num_users)
        values = min_sinr(table, grid)
        index = int(np.argmax(values))
        if values[index] >= best:
            best, point = float(values[index]), grid[index]
        step = step * 4 / (points_per_axis - 1)
    return best


class TestFeasibility:
    def test_zero_target(self, rng):
        result = ul_feasible(0.0, random_table(rng, 3))
        assert result.feasible
        assert np.all(result.point == 0)

    def test_negative_target(self, rng):
        with pytest.raises(ValueError):
            ul_feasible(-1.0, random_table(rng, 2))

    def test_iterates_increase_to_the_fixed_point(self, rng):
        table = random_table(rng, 3)
        iterates = []
        ul_feasible(0.5, table, iterates=iterates)
        steps = np.diff(np.array(iterates), axis=0)
        assert np.all(steps >= -1e-15)
        assert np.all(iterates[-1] <= table.caps)

    def test_unreachable_target(self, rng):
        table = random_table(rng, 2)
        result = ul_feasible(1e6, table)
        assert result.status is FeasibilityStatus.INFEASIBLE
        assert result.margin > 0

    def test_iteration_cap(self, rng):
        table = random_table(rng, 3)
        result = ul_feasible(0.5, table, max_iterations=1)
        assert result.status is FeasibilityStatus.NUMERICAL_FAILURE


class TestSolve:
    def test_single_user_closed_form(self):
        table = UlGainTable(np.array([2.0]), np.zeros((1, 1)), np.array([0.1]), np.array([0.3]))
        solution = solve_ul_maxmin(table, CONFIG)
        assert solution.powers == pytest.approx([0.3])
        assert solution.gamma == pytest.approx(0.3 * 2.0 / 0.1)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_the_linear_system_oracle(self, seed):
        table = random_table(np.random.default_rng(seed), 3)
        solution = solve_ul_maxmin(table, CONFIG, tol=1e-10)
        assert reachable(solution.gamma, table, slack=1e-6)
        assert not reachable(solution.gamma * (1 + 1e-3), table)
        assert np.all(solution.powers <= table.caps)
        # at least one user sits on its cap
        assert np.any(np.isclose(solution.powers, table.caps, rtol=0, atol=0))

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_a_power_grid(self, seed):
        table = random_table(np.random.default_rng(100 + seed), 2 + seed % 2)
        solution = solve_ul_maxmin(table, CONFIG, tol=1e-10)
        coarse, point = grid_maxmin(table, 200)
        assert coarse <= solution.gamma * (1 + 1e-6)
        assert solution.gamma == pytest.approx(refine_maxmin(table, point, table.caps / 200),
                                               rel=1e-3)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4))
    def test_optimum_balances_sinrs_with_one_user_capped(self, seed, num_users):
        table = random_table(np.random.default_rng(seed), num_users)
        solution = solve_ul_maxmin(table, CONFIG, tol=1e-10)
        sinr = table.sinr(solution.powers)
        assert np.max(sinr) <= np.min(sinr) * (1 + 1e-5)
        assert np.any(solution.powers == table.caps)
        assert np.all(solution.powers <= table.caps)

    def test_bisection_trace_and_rate(self, rng):
        table = random_table(rng, 3)
        solution = solve_ul_maxmin(table, CONFIG)
        assert solution.oracle_calls == len(solution.trace) + 1
        assert solution.min_rate == pytest.approx(
            CONFIG.ul_symbols / CONFIG.coherence_block * CONFIG.bandwidth
            * np.log2(1 + solution.gamma)
        )


class TestGainTable:
    def test_validation(self):
        with pytest.raises(ValidationError):
            UlGainTable(np.ones(2), np.ones((2, 2)), np.ones(2), np.ones(2))
        with pytest.raises(ValidationError):
            UlGainTable(np.ones(2), np.zeros((2, 2)), np.zeros(2), np.ones(2))

    def test_matches_direct_sinr(self, estimated_channels, small_scenario):
        config = small_scenario.config
        beams = conjugate_beamformers(estimated_channels.estimates, small_scenario.association)
        limits = ExposureLimits.uniform(config.num_users)
        table = build_gain_table(estimated_channels.estimates, beams.ul_filters,
                                 small_scenario.association, config.noise_power, limits,
                                 config.ul_power_budget)
        powers = np.linspace(0.002, 0.01, config.num_users)
        direct = ul_sinr(estimated_channels.estimates, beams.ul_filters,
                         small_scenario.association, powers, config.noise_power)
        assert table.sinr(powers) == pytest.approx(direct, rel=1e-9)
        assert table.caps == pytest.approx(np.full(config.num_users, 0.01))

    def test_zero_desired_gain(self):
        channels = np.zeros((1, 1, 1), dtype=complex)
        filters = np.ones((1, 1, 1), dtype=complex)
        with pytest.raises(DegenerateLinkError):
            build_gain_table(channels, filters, np.ones((1, 1)), 1.0,
                             ExposureLimits.uniform(1), 0.1)


def test_sar_caps_bind_and_unconstrained_reaches_the_budget(estimated_channels,
                                                            small_scenario):
    config = small_scenario.config
    beams = conjugate_beamformers(estimated_channels.estimates, small_scenario.association)
    limits = ExposureLimits.uniform(config.num_users)
    args = (estimated_channels.estimates, beams.ul_filters, small_scenario.association,
            config.noise_power)

    constrained = solve_ul_maxmin(
        build_gain_table(*args, limits, config.ul_power_budget), config
    )
    assert np.all(constrained.powers <= 0.01 + 1e-9)
    assert np.all(sar(constrained.powers, limits.sar_coeffs) <= 0.08 + 1e-8)

    unconstrained = solve_ul_maxmin(
        build_gain_table(*args, limits.relaxed(), config.ul_power_budget), config
    )
    assert np.max(sar(unconstrained.powers, limits.sar_coeffs)) == pytest.approx(0.8, rel=1e-12)
    assert unconstrained.gamma >= constrained.gamma - 2e-4 * max(constrained.gamma, 1.0)
