"""Uplink max-min power control under power-budget and SAR constraints.

For a fixed SINR target the constraints q_k G_kk >= target (sum_j G_kj q_j + N_k)
with 0 <= q <= q_max form a standard interference system, so feasibility is
decided by the capped fixed-point iteration started from q = 0. Bisection on
the target then gives the global max-min solution.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config import (
    BISECTION_TOL, UL_FIXED_POINT_MAX_ITER, UL_FIXED_POINT_TOL, UL_SINR_SLACK,
)
from logger import LogManager
from metrics import rate, ul_combined_gains, ul_noise_gains
from models import (
    DegenerateLinkError, ExposureLimits, FeasibilityStatus, NetworkConfig, SolverError,
    ValidationError,
)
from .convex_core import FeasibilityResult, bisection

logger = LogManager().get_logger("ul_opt")


@dataclass
class UlGainTable:
    """Gains of the combined uplink signals and the per-user power caps."""
    desired: np.ndarray  # G_kk
    cross: np.ndarray    # G_kj, zero diagonal
    noise: np.ndarray    # N_k
    caps: np.ndarray     # q_max

    def __post_init__(self):
        """Validate the table."""
        errors = []
        num_users = self.desired.shape[0]
        if self.cross.shape != (num_users, num_users):
            errors.append(f"cross gains must be {num_users}x{num_users}")
        elif np.any(np.diag(self.cross) != 0):
            errors.append("cross gains must have a zero diagonal")
        if self.noise.shape != (num_users,) or self.caps.shape != (num_users,):
            errors.append("noise and caps need one entry per user")
        for name in ('desired', 'cross', 'caps'):
            if np.any(getattr(self, name) < 0):
                errors.append(f"{name} must be non-negative")
        if np.any(self.noise <= 0):
            errors.append("noise terms must be strictly positive")
        if errors:
            raise ValidationError("\n".join(errors))

    @property
    def num_users(self) -> int:
        return self.desired.shape[0]

    def sinr(self, powers: np.ndarray) -> np.ndarray:
        """SINR of every user for a power vector."""
        return powers * self.desired / (self.cross @ powers + self.noise)


@dataclass
class UlSolution:
    """Max-min uplink allocation."""
    powers: np.ndarray
    gamma: float  # min SINR on the design channels
    min_rate: float
    status: FeasibilityStatus
    oracle_calls: int = 0
    trace: List[Tuple[float, float]] = field(default_factory=list)  # bisection brackets


def build_gain_table(
    channels: np.ndarray,
    filters: np.ndarray,
    association: np.ndarray,
    noise_power,
    limits: ExposureLimits,
    budgets: np.ndarray,
) -> UlGainTable:
    """
    Precompute the uplink SINR terms and fold SAR into power caps.

    Args:
        channels: K x M x L design channels (normally the estimates)
        filters: K x M x L combining filters
        association: K x M binary matrix
        noise_power: eta^2 (scalar or M values)
        limits: Exposure limits (ExposureLimits.unconstrained() ignores SAR)
        budgets: Q_k, scalar or K values in W

    Returns:
        UlGainTable with caps min(Q_k, min_n E_kn / b_kn)

    Raises:
        DegenerateLinkError: If a user has zero desired gain
    """
    gains = np.abs(ul_combined_gains(channels, filters, association)) ** 2
    desired = np.diag(gains).copy()
    if np.any(desired <= 0):
        raise DegenerateLinkError(
            f"Zero uplink gain for user(s) {np.flatnonzero(desired <= 0).tolist()}"
        )
    cross = gains - np.diag(desired)
    num_users = desired.shape[0]
    caps = limits.ul_power_caps(np.broadcast_to(np.asarray(budgets, dtype=float), (num_users,)))

    return UlGainTable(
        desired=desired,
        cross=cross,
        noise=ul_noise_gains(filters, association, noise_power),
        caps=np.array(caps, dtype=float),
    )


def ul_feasible(
    target: float,
    table: UlGainTable,
    max_iterations: int = UL_FIXED_POINT_MAX_ITER,
    tol: float = UL_FIXED_POINT_TOL,
    iterates: Optional[List[np.ndarray]] = None,
) -> FeasibilityResult:
    """
    Check whether every user can reach a common SINR target.

    Iterates q <- min(q_max, target * (G q + N) / G_kk) from q = 0. The
    sequence is non-decreasing and bounded by the caps.

    Args:
        target: Common SINR target (>= 0)
        table: Gain table
        max_iterations: Iteration cap
        tol: Relative change threshold
        iterates: Optional list collecting every iterate

    Returns:
        FeasibilityResult with margin max_k (1 - SINR_k / target) at the fixed point;
        NUMERICAL_FAILURE if the iteration cap is hit

    Raises:
        ValueError: If the target is negative
    """
    if target < 0:
        raise ValueError(f"SINR target must be non-negative, got {target}")

    powers = np.zeros(table.num_users)
    if target == 0:
        return FeasibilityResult(0.0, powers, FeasibilityStatus.FEASIBLE)

    for iteration in range(1, max_iterations + 1):
        updated = np.minimum(
            table.caps, target * (table.cross @ powers + table.noise) / table.desired
        )
        change = np.max(np.abs(updated - powers))
        powers = updated
        if iterates is not None:
            iterates.append(powers.copy())
        if change <= tol * np.max(powers):
            break
    else:
        logger.warning(f"Fixed point did not converge in {max_iterations} iterations "
                       f"(target {target:.6e})")
        margin = float(np.max(1.0 - table.sinr(powers) / target))
        return FeasibilityResult(margin, powers, FeasibilityStatus.NUMERICAL_FAILURE)

    margin = float(np.max(1.0 - table.sinr(powers) / target))
    status = FeasibilityStatus.FEASIBLE if margin <= UL_SINR_SLACK else FeasibilityStatus.INFEASIBLE
    logger.debug(f"ul_feasible({target:.6e}): {status.value} after {iteration} iterations")
    return FeasibilityResult(margin, powers, status, newton_iterations=iteration)


def solve_ul_maxmin(
    table: UlGainTable,
    config: NetworkConfig,
    tol: float = BISECTION_TOL,
) -> UlSolution:
    """
    Globally optimal max-min uplink powers.

    Bisects the common SINR target over [0, max_k q_max,k G_kk / N_k], then
    scales the witness by c = min_k q_max,k / q_k >= 1 so that at least one
    user transmits at its cap.

    Args:
        table: Gain table built on the design channels
        config: Supplies the uplink frame structure and bandwidth
        tol: Relative bisection tolerance

    Returns:
        UlSolution
    """
    upper = float(np.max(table.caps * table.desired / table.noise))
    result = bisection(lambda target: ul_feasible(target, table), 0.0, upper, tol)
    if result.point is None:
        raise SolverError("Uplink bisection lost its feasible lower end")

    powers = np.array(result.point, dtype=float)
    positive = powers > 0
    if np.any(positive):
        ratios = np.full(powers.shape, np.inf)
        ratios[positive] = table.caps[positive] / powers[positive]
        capped_user = int(np.argmin(ratios))
        powers = np.minimum(powers * ratios[capped_user], table.caps)
        powers[capped_user] = table.caps[capped_user]

    gamma = float(np.min(table.sinr(powers)))
    min_rate = rate(gamma, config.ul_symbols, config.coherence_block, config.bandwidth)
    logger.debug(
        f"UL max-min: gamma={gamma:.6e} (bisection {result.value:.6e}, "
        f"{result.oracle_calls} oracle calls)"
    )
    return UlSolution(
        powers=powers,
        gamma=gamma,
        min_rate=min_rate,
        status=result.status,
        oracle_calls=result.oracle_calls,
        trace=result.brackets,
    )
