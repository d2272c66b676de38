import math

import numpy as np
import pytest

from models import FeasibilityStatus, ValidationError
from power_control import (
    FeasibilityResult, QuadraticConstraint, bisection, convex_core, qcqp_feasibility,
)


def threshold_oracle(threshold, calls=None):
    def oracle(target):
        if calls is not None:
            calls.append(target)
        status = (FeasibilityStatus.FEASIBLE if target <= threshold
                  else FeasibilityStatus.INFEASIBLE)
        return FeasibilityResult(target - threshold, np.array([target]), status)
    return oracle


class TestBisection:
    @pytest.mark.parametrize("threshold", [0.003, 0.37, 3.7, 42.0])
    def test_finds_the_threshold(self, threshold):
        tol = 1e-6
        result = bisection(threshold_oracle(threshold), 0.0, 50.0, tol)
        assert result.status is FeasibilityStatus.FEASIBLE
        assert result.value <= threshold
        assert threshold - result.value <= tol * max(threshold, 1.0) * 2
        bound = 2 + math.ceil(math.log2(50.0 / (tol * max(threshold, 1.0))))
        assert result.oracle_calls <= bound
        assert result.point[0] == result.value

    def test_brackets_shrink(self):
        result = bisection(threshold_oracle(1.3), 0.0, 4.0, 1e-4)
        widths = [hi - lo for lo, hi in result.brackets]
        assert all(later <= earlier for earlier, later in zip(widths, widths[1:]))

    def test_feasible_upper_end(self):
        result = bisection(threshold_oracle(10.0), 0.0, 5.0)
        assert result.value == 5.0
        assert result.oracle_calls == 2

    def test_infeasible_lower_end(self):
        result = bisection(threshold_oracle(-1.0), 0.0, 5.0)
        assert result.status is FeasibilityStatus.INFEASIBLE
        assert result.point is None

    def test_degenerate_bracket(self):
        calls = []
        result = bisection(threshold_oracle(1.0, calls), 0.5, 0.5)
        assert result.value == 0.5
        assert calls == [0.5]

    def test_non_monotone_oracle(self):
        def oracle(target):
            status = FeasibilityStatus.FEASIBLE if target > 1 else FeasibilityStatus.INFEASIBLE
            return FeasibilityResult(0.0, np.zeros(1), status)

        result = bisection(oracle, 0.0, 2.0)
        assert result.status is FeasibilityStatus.NUMERICAL_FAILURE
        assert result.point is None

    def test_numerical_failures_count_as_infeasible(self):
        def oracle(target):
            if target <= 1.0:
                return FeasibilityResult(-1.0, np.zeros(1), FeasibilityStatus.FEASIBLE)
            return FeasibilityResult(np.nan, None, FeasibilityStatus.NUMERICAL_FAILURE)

        result = bisection(oracle, 0.0, 2.0, 1e-6)
        assert result.value == pytest.approx(1.0, abs=1e-5)
        assert result.failed_calls > 0

    def test_empty_bracket(self):
        with pytest.raises(ValueError):
            bisection(threshold_oracle(1.0), 2.0, 1.0)


def disc(radius_squared, name="disc"):
    return QuadraticConstraint(np.eye(2), np.zeros(2), rhs=radius_squared, name=name)


def half_plane(normal, offset, name="half_plane"):
    """normal^T x >= offset, written as -normal^T x <= -offset."""
    return QuadraticConstraint(None, -np.asarray(normal, dtype=float), rhs=-offset, name=name)


class TestQcqpFeasibility:
    def test_feasible_set_from_a_far_start(self):
        constraints = [disc(1.0), half_plane([1.0, 0.0], 0.5)]
        result = qcqp_feasibility(constraints, 2, start=np.array([5.0, 5.0]))
        assert result.status is FeasibilityStatus.FEASIBLE
        assert all(c.violation(result.point) <= 1e-6 for c in constraints)
        assert result.barrier_iterations >= 1

    def test_feasible_start_returns_immediately(self):
        start = np.array([0.7, 0.1])
        result = qcqp_feasibility([disc(1.0), half_plane([1.0, 0.0], 0.5)], 2, start=start)
        assert result.feasible
        assert np.array_equal(result.point, start)
        assert result.newton_iterations == 0

    def test_disjoint_sets_are_infeasible(self):
        result = qcqp_feasibility([disc(1.0), half_plane([1.0, 0.0], 2.0)], 2)
        assert result.status is FeasibilityStatus.INFEASIBLE
        # min over x of max(x^2 - 1, (2 - x) / 2) is attained where both are equal
        x = (-1 + math.sqrt(33)) / 4
        assert result.margin >= x ** 2 - 1 - 1e-9

    def test_barrier_objective_is_non_increasing(self):
        constraints = [
            disc(4.0),
            half_plane([1.0, 1.0], 2.5),
            QuadraticConstraint(np.diag([1.0, 3.0]), np.array([-1.0, 0.0]), rhs=4.0),
        ]
        result = qcqp_feasibility(constraints, 2, start=np.array([-6.0, 4.0]))
        assert result.feasible
        # values along the central path, after the first centring
        history = np.array(result.objective_history[1:])
        assert np.all(np.diff(history) <= 1e-6 * np.maximum(1.0, np.abs(history[:-1])))

    def test_linear_system(self):
        constraints = [half_plane([1.0, 0.0], 1.0), half_plane([0.0, 1.0], 1.0),
                       QuadraticConstraint(None, np.ones(2), rhs=3.0)]
        result = qcqp_feasibility(constraints, 2)
        assert result.feasible
        assert result.point.sum() <= 3.0 + 1e-6 * 3.0

    def test_newton_iteration_cap_is_a_numerical_failure(self, monkeypatch):
        monkeypatch.setattr(convex_core, 'MAX_NEWTON_ITERATIONS', 1)
        result = qcqp_feasibility([disc(1.0), half_plane([1.0, 0.0], 2.0)], 2)
        assert result.status is FeasibilityStatus.NUMERICAL_FAILURE
        assert result.point is not None
        assert result.barrier_iterations == 1

    def test_no_constraints(self):
        assert qcqp_feasibility([], 3).feasible

    def test_wrong_start_dimension(self):
        with pytest.raises(ValidationError):
            qcqp_feasibility([disc(1.0)], 2, start=np.zeros(3))


class TestQuadraticConstraint:
    def test_rejects_indefinite_matrix(self):
        with pytest.raises(ValidationError):
            QuadraticConstraint(np.diag([1.0, -1.0]), np.zeros(2))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValidationError):
            QuadraticConstraint(np.eye(3), np.zeros(2))

    def test_rejects_infinite_rhs(self):
        with pytest.raises(ValidationError):
            QuadraticConstraint(None, np.ones(2), rhs=np.inf)

    def test_value_and_normalised_violation(self):
        constraint = QuadraticConstraint(np.eye(2), np.array([1.0, 0.0]), constant=1.0, rhs=-4.0)
        x = np.array([1.0, 2.0])
        assert constraint.value(x) == pytest.approx(7.0)
        assert constraint.violation(x) == pytest.approx(11.0 / 4.0)
