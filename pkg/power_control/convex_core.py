"""Bisection over feasibility oracles and a phase-I QCQP feasibility solver.

The feasibility solver handles constraints x^T Q x + l^T x + c <= rhs with PSD
Q. It minimises the largest normalised violation s via a log-barrier
interior-point method:

    minimise t * s - sum_i log(s - g_i(x)),  g_i = (x^T Q_i x + l_i^T x + c_i - rhs_i) / scale_i

with damped Newton steps and backtracking, increasing t geometrically. A
point with s < 0 is strictly feasible; a lower bound s - m/t above the
tolerance certifies infeasibility.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, lstsq, solve

from config import (
    BARRIER_GAP_TOL, BARRIER_MU, BARRIER_T0, BISECTION_TOL, FEASIBILITY_TOL,
    MAX_BACKTRACKING_STEPS, MAX_BARRIER_ITERATIONS, MAX_NEWTON_ITERATIONS, NEWTON_TOL,
)
from logger import LogManager
from models import FeasibilityStatus, ValidationError

logger = LogManager().get_logger("convex_core")

ARMIJO_FRACTION = 0.25
BACKTRACKING_FACTOR = 0.5
PSD_TOLERANCE = 1e-10


@dataclass
class QuadraticConstraint:
    """Constraint x^T Q x + l^T x + c <= rhs (Q may be None for linear rows)."""
    quadratic_term: Optional[np.ndarray]
    linear_term: np.ndarray
    constant: float = 0.0
    rhs: float = 0.0
    name: str = ""
    check_psd: bool = field(default=True, repr=False)

    def __post_init__(self):
        """Validate shapes and convexity."""
        self.linear_term = np.asarray(self.linear_term, dtype=float).reshape(-1)
        errors = []

        if self.quadratic_term is not None:
            self.quadratic_term = np.asarray(self.quadratic_term, dtype=float)
            n = self.linear_term.shape[0]
            if self.quadratic_term.shape != (n, n):
                errors.append(
                    f"quadratic_term shape {self.quadratic_term.shape} does not match "
                    f"linear_term length {n}"
                )
            elif self.check_psd:
                if not np.allclose(self.quadratic_term, self.quadratic_term.T):
                    errors.append(f"quadratic_term of {self.name or 'constraint'} is not symmetric")
                else:
                    norm = np.linalg.norm(self.quadratic_term, 2)
                    if np.linalg.eigvalsh(self.quadratic_term)[0] < -PSD_TOLERANCE * norm:
                        errors.append(f"quadratic_term of {self.name or 'constraint'} is not PSD")

        if not np.isfinite(self.rhs) or not np.isfinite(self.constant):
            errors.append("rhs and constant must be finite")

        if errors:
            raise ValidationError("\n".join(errors))

    @property
    def scale(self) -> float:
        return max(abs(self.rhs), 1.0)

    def value(self, x: np.ndarray) -> float:
        """Left-hand side at x."""
        result = self.linear_term @ x + self.constant
        if self.quadratic_term is not None:
            result += x @ self.quadratic_term @ x
        return float(result)

    def violation(self, x: np.ndarray) -> float:
        """Normalised violation (value - rhs) / scale."""
        return (self.value(x) - self.rhs) / self.scale


@dataclass
class FeasibilityResult:
    """Outcome of one feasibility check."""
    margin: float
    point: Optional[np.ndarray]
    status: FeasibilityStatus
    newton_iterations: int = 0
    barrier_iterations: int = 0
    objective_history: List[float] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status is FeasibilityStatus.FEASIBLE


@dataclass
class BisectionResult:
    """Largest feasible target found by bisection."""
    value: float
    point: Optional[np.ndarray]
    status: FeasibilityStatus
    oracle_calls: int
    brackets: List[Tuple[float, float]] = field(default_factory=list)
    failed_calls: int = 0  # oracle numerical failures, treated as infeasible


def bisection(
    oracle: Callable[[float], FeasibilityResult],
    lo: float,
    hi: float,
    tol: float = BISECTION_TOL,
) -> BisectionResult:
    """
    Find the largest target in [lo, hi] accepted by a monotone oracle.

    Stops when the bracket width is at most tol * max(hi, 1), with hi the
    current upper end.

    Args:
        oracle: Maps a target to a FeasibilityResult
        lo: Lower end (expected feasible)
        hi: Upper end
        tol: Relative tolerance

    Returns:
        BisectionResult; status INFEASIBLE with no point if lo is rejected,
        NUMERICAL_FAILURE if hi is accepted while lo is not

    Raises:
        ValueError: If hi < lo
    """
    if hi < lo:
        raise ValueError(f"Empty bisection bracket [{lo}, {hi}]")

    calls = 1
    low_result = oracle(lo)
    if lo == hi or not low_result.feasible:
        if low_result.feasible:
            return BisectionResult(lo, low_result.point, FeasibilityStatus.FEASIBLE, calls)

        calls += 1
        if lo != hi and oracle(hi).feasible:
            logger.warning(f"Non-monotone oracle: {hi:.6e} accepted but {lo:.6e} rejected")
            return BisectionResult(lo, None, FeasibilityStatus.NUMERICAL_FAILURE, calls)
        status = (FeasibilityStatus.NUMERICAL_FAILURE
                  if low_result.status is FeasibilityStatus.NUMERICAL_FAILURE
                  else FeasibilityStatus.INFEASIBLE)
        return BisectionResult(lo, None, status, calls)

    calls += 1
    high_result = oracle(hi)
    if high_result.feasible:
        return BisectionResult(hi, high_result.point, FeasibilityStatus.FEASIBLE, calls,
                               [(lo, hi)])

    best = low_result
    failed = int(high_result.status is FeasibilityStatus.NUMERICAL_FAILURE)
    brackets = [(lo, hi)]
    while hi - lo > tol * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        result = oracle(mid)
        calls += 1
        if result.feasible:
            lo, best = mid, result
        else:
            hi = mid
            failed += int(result.status is FeasibilityStatus.NUMERICAL_FAILURE)
        brackets.append((lo, hi))
        logger.debug(f"bisection: [{lo:.9e}, {hi:.9e}] after {calls} calls")

    if failed:
        logger.warning(f"{failed} oracle call(s) failed numerically and were treated as infeasible")
    return BisectionResult(lo, best.point, FeasibilityStatus.FEASIBLE, calls, brackets, failed)


class _ConstraintStack:
    """Constraints stacked into arrays, normalised by their scales."""

    def __init__(self, constraints: Sequence[QuadraticConstraint], dimension: int):
        for constraint in constraints:
            if constraint.linear_term.shape[0] != dimension:
                raise ValidationError(
                    f"Constraint {constraint.name!r} has dimension "
                    f"{constraint.linear_term.shape[0]}, expected {dimension}"
                )
        self.size = len(constraints)
        self.dimension = dimension
        self.scale = np.array([c.scale for c in constraints])
        self.linear = np.array([c.linear_term for c in constraints]).reshape(self.size, dimension)
        self.offset = np.array([c.constant - c.rhs for c in constraints])
        self.quadratic_index = np.array(
            [i for i, c in enumerate(constraints) if c.quadratic_term is not None], dtype=int
        )
        self.quadratic = np.array(
            [constraints[i].quadratic_term for i in self.quadratic_index]
        ).reshape(len(self.quadratic_index), dimension, dimension)

    def evaluate(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Normalised values and Jacobian at x."""
        values = self.linear @ x + self.offset
        jacobian = self.linear.copy()
        if self.quadratic_index.size:
            qx = np.einsum('cij,j->ci', self.quadratic, x)
            values[self.quadratic_index] += qx @ x
            jacobian[self.quadratic_index] += 2.0 * qx
        return values / self.scale, jacobian / self.scale[:, None]

    def curvature(self, weights: np.ndarray) -> np.ndarray:
        """sum_i w_i * Hessian of the normalised g_i."""
        if not self.quadratic_index.size:
            return np.zeros((self.dimension, self.dimension))
        w = 2.0 * weights[self.quadratic_index] / self.scale[self.quadratic_index]
        return np.einsum('c,cij->ij', w, self.quadratic)


def _barrier(stack: _ConstraintStack, x: np.ndarray, s: float, t: float) -> float:
    values, _ = stack.evaluate(x)
    slack = s - values
    if np.any(slack <= 0):
        return np.inf
    return t * s - np.sum(np.log(slack))


def _centre(
    stack: _ConstraintStack, x: np.ndarray, s: float, t: float
) -> Tuple[np.ndarray, float, int, bool]:
    """Newton centring for one barrier weight; stops early once s < 0."""
    n = stack.dimension
    for iteration in range(MAX_NEWTON_ITERATIONS):
        values, jacobian = stack.evaluate(x)
        inv_slack = 1.0 / (s - values)

        gradient = np.append(jacobian.T @ inv_slack, t - inv_slack.sum())
        augmented = np.hstack([jacobian, -np.ones((stack.size, 1))])
        hessian = (augmented * inv_slack[:, None] ** 2).T @ augmented
        hessian[:n, :n] += stack.curvature(inv_slack)

        try:
            step = -solve(hessian, gradient, assume_a='sym')
        except LinAlgError:
            step = -lstsq(hessian, gradient)[0]

        decrement = -gradient @ step
        if decrement / 2.0 <= NEWTON_TOL:
            return x, s, iteration, True

        current = _barrier(stack, x, s, t)
        eta = 1.0
        for _ in range(MAX_BACKTRACKING_STEPS):
            candidate_x = x + eta * step[:n]
            candidate_s = s + eta * step[n]
            if _barrier(stack, candidate_x, candidate_s, t) <= current - ARMIJO_FRACTION * eta * decrement:
                break
            eta *= BACKTRACKING_FACTOR
        else:
            return x, s, iteration, False

        x, s = candidate_x, candidate_s
        if s < 0:
            return x, s, iteration + 1, True

    return x, s, MAX_NEWTON_ITERATIONS, False


def qcqp_feasibility(
    constraints: Sequence[QuadraticConstraint],
    dimension: int,
    start: Optional[np.ndarray] = None,
    tol: float = FEASIBILITY_TOL,
) -> FeasibilityResult:
    """
    Decide feasibility of a convex quadratically-constrained set.

    Args:
        constraints: Convex quadratic constraints over R^dimension
        dimension: Number of variables
        start: Optional warm start (any point, feasible or not)
        tol: Feasibility tolerance on the normalised violation

    Returns:
        FeasibilityResult whose margin is the largest normalised violation at
        the returned point; FEASIBLE iff margin <= tol
    """
    x = np.zeros(dimension) if start is None else np.array(start, dtype=float).reshape(-1)
    if x.shape[0] != dimension:
        raise ValidationError(f"Start point has dimension {x.shape[0]}, expected {dimension}")
    if not constraints:
        return FeasibilityResult(-np.inf, x, FeasibilityStatus.FEASIBLE)

    stack = _ConstraintStack(constraints, dimension)
    values, _ = stack.evaluate(x)
    margin = float(values.max())
    if margin <= 0:
        return FeasibilityResult(margin, x, FeasibilityStatus.FEASIBLE, objective_history=[margin])

    s = margin + 1.0
    t = BARRIER_T0
    history = [s]
    best_x, best_margin = x, margin
    newton_total = 0

    def finish(status: FeasibilityStatus, point: np.ndarray, value: float,
               iterations: int) -> FeasibilityResult:
        logger.debug(
            f"phase-I {status.value}: margin={value:.3e}, barrier iterations={iterations}, "
            f"newton iterations={newton_total}"
        )
        return FeasibilityResult(value, point, status, newton_total, iterations, history)

    for outer in range(1, MAX_BARRIER_ITERATIONS + 1):
        x, s, steps, converged = _centre(stack, x, s, t)
        newton_total += steps
        history.append(s)

        values, _ = stack.evaluate(x)
        margin = float(values.max())
        if margin < best_margin:
            best_x, best_margin = x, margin

        if not converged:
            return finish(FeasibilityStatus.NUMERICAL_FAILURE, best_x, best_margin, outer)
        if margin <= 0:
            return finish(FeasibilityStatus.FEASIBLE, x, margin, outer)

        gap = stack.size / t
        if s - gap > tol:
            return finish(FeasibilityStatus.INFEASIBLE, best_x, best_margin, outer)
        if gap < BARRIER_GAP_TOL:
            status = (FeasibilityStatus.FEASIBLE if best_margin <= tol
                      else FeasibilityStatus.INFEASIBLE)
            return finish(status, best_x, best_margin, outer)

        t *= BARRIER_MU

    return finish(FeasibilityStatus.NUMERICAL_FAILURE, best_x, best_margin, MAX_BARRIER_ITERATIONS)
