"""Downlink max-min power control under per-AP budgets and IPD caps.

Works on the amplitudes phi = sqrt(p) of the active links, stacked user by
user. Budgets and IPD caps are convex quadratics in phi; the SINR constraint

    target * (interference(phi) + 1) - |g_k^T phi_k|^2 <= 0

is a difference of convex functions. Successive convex optimisation replaces
the concave part by its first-order expansion at the previous iterate, which
is a global minorant, so every accepted point is feasible for the original
problem. Gains are normalised by the user noise standard deviation, making
the constraint rows dimensionless SINR quantities.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from config import (
    BISECTION_TOL, DL_LOOP_NESTING, MAX_OUTER_ITERATIONS, SCO_TOLERANCE,
)
from logger import LogManager
from metrics import cross_gains, rate
from models import ExposureLimits, FeasibilityStatus, NetworkConfig, ValidationError
from .convex_core import (
    FeasibilityResult, QuadraticConstraint, bisection, qcqp_feasibility,
)

logger = LogManager().get_logger("dl_opt")


@dataclass
class DlProblemData:
    """Precomputed channel-beam products and constraint data of one DL problem."""
    config: NetworkConfig
    users: np.ndarray       # n, user of each active link (user-major order)
    aps: np.ndarray         # n, AP of each active link
    gains: np.ndarray       # K x n, h_{k,m}^H b_{j,m} / sigma_k for link (j, m)
    budgets: np.ndarray     # M, P_m in W
    ipd_caps: np.ndarray    # K, W/m^2
    noise: np.ndarray       # K, sigma_k^2 in W
    ipd_scale: float        # 4 pi / lambda^2
    stream_gram: np.ndarray = field(init=False, repr=False)       # K x n x n
    desired_gram: np.ndarray = field(init=False, repr=False)      # K x n x n
    interference_gram: np.ndarray = field(init=False, repr=False)  # K x n x n

    def __post_init__(self):
        """Validate shapes and build the Gram matrices."""
        errors = []
        num_users = self.ipd_caps.shape[0]
        n = self.users.shape[0]
        if self.gains.shape != (num_users, n):
            errors.append(f"gains must be {num_users}x{n}, got {self.gains.shape}")
        if self.aps.shape != (n,):
            errors.append("users and aps must describe the same links")
        if np.any(self.noise <= 0):
            errors.append("noise powers must be strictly positive")
        if np.any(self.budgets <= 0):
            errors.append("AP budgets must be strictly positive")
        if errors:
            raise ValidationError("\n".join(errors))

        same_stream = self.users[:, None] == self.users[None, :]
        outer = np.real(self.gains.conj()[:, :, None] * self.gains[:, None, :])
        own = (self.users[None, :] == np.arange(num_users)[:, None]).astype(float)

        self.stream_gram = outer * same_stream
        self.desired_gram = outer * own[:, :, None] * own[:, None, :]
        self.interference_gram = self.stream_gram - self.desired_gram

    @property
    def num_users(self) -> int:
        return self.ipd_caps.shape[0]

    @property
    def dimension(self) -> int:
        return self.users.shape[0]

    def desired_vector(self, user: int) -> np.ndarray:
        """Normalised desired gains of a user, zero outside its own links."""
        return np.where(self.users == user, self.gains[user], 0.0)

    def effective_gains(self) -> np.ndarray:
        """K x M matrix g_{k,m} = a_{k,m} h_{k,m}^H b_{k,m} (unnormalised)."""
        result = np.zeros((self.num_users, self.config.num_aps), dtype=complex)
        own = self.gains[self.users, np.arange(self.dimension)]
        result[self.users, self.aps] = own * np.sqrt(self.noise[self.users])
        return result

    def sinr(self, amplitudes: np.ndarray) -> np.ndarray:
        """Exact SINR of every user for stacked amplitudes."""
        desired = np.einsum('i,kij,j->k', amplitudes, self.desired_gram, amplitudes)
        interference = np.einsum('i,kij,j->k', amplitudes, self.interference_gram, amplitudes)
        return desired / (interference + 1.0)

    def ipd(self, amplitudes: np.ndarray) -> np.ndarray:
        """IPD of every user in W/m^2 for stacked amplitudes."""
        received = np.einsum('i,kij,j->k', amplitudes, self.stream_gram, amplitudes)
        return self.ipd_scale * self.noise * received

    def to_powers(self, amplitudes: np.ndarray) -> np.ndarray:
        """Scatter stacked amplitudes into a K x M power matrix."""
        powers = np.zeros((self.num_users, self.config.num_aps))
        powers[self.users, self.aps] = np.maximum(amplitudes, 0.0) ** 2
        return powers

    def from_powers(self, powers: np.ndarray) -> np.ndarray:
        """Gather the amplitudes of the active links from a K x M power matrix."""
        return np.sqrt(np.asarray(powers)[self.users, self.aps])


@dataclass
class DlSolution:
    """Max-min downlink allocation."""
    powers: np.ndarray  # K x M
    gamma: float        # min SINR on the design channels
    min_rate: float
    status: FeasibilityStatus
    trace: List[Tuple[int, float, float, int]] = field(default_factory=list)


def build_dl_problem(
    channels: np.ndarray,
    beams: np.ndarray,
    association: np.ndarray,
    limits: ExposureLimits,
    config: NetworkConfig,
) -> DlProblemData:
    """
    Precompute every channel-beam product of a DL problem.

    Args:
        channels: K x M x L design channels (normally the estimates)
        beams: K x M x L unit-norm beams
        association: K x M binary matrix
        limits: Exposure limits (infinite IPD caps drop the IPD constraints)
        config: Supplies budgets, noise and wavelength

    Returns:
        DlProblemData over the active links
    """
    active = np.argwhere(np.asarray(association) == 1)
    users, aps = active[:, 0], active[:, 1]
    noise = np.full(config.num_users, config.noise_power)

    gains = cross_gains(channels, beams)[:, users, aps] / np.sqrt(noise)[:, None]

    return DlProblemData(
        config=config,
        users=users,
        aps=aps,
        gains=gains,
        budgets=np.full(config.num_aps, config.dl_power_budget),
        ipd_caps=np.array(limits.ipd_caps, dtype=float),
        noise=noise,
        ipd_scale=4.0 * np.pi / config.wavelength ** 2,
    )


def linearize_desired(previous: np.ndarray, gains: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    First-order expansion of f(phi) = |g^T phi|^2 at a real point.

    Args:
        previous: Expansion point (real, non-negative)
        gains: Complex gain vector g

    Returns:
        (f(previous), gradient 2 Re(conj(g) g^T) previous)
    """
    amplitude = gains @ previous
    return float(np.abs(amplitude) ** 2), 2.0 * np.real(gains.conj() * amplitude)


def _static_constraints(data: DlProblemData) -> List[QuadraticConstraint]:
    """Sign, budget and IPD constraints (independent of the target).

    Budget and IPD rows are divided by their caps so that the phase-I
    tolerance is relative to the cap.
    """
    n = data.dimension
    constraints = [
        QuadraticConstraint(None, row, name=f"sign[{i}]") for i, row in enumerate(-np.eye(n))
    ]

    for ap in np.unique(data.aps):
        mask = (data.aps == ap).astype(float)
        constraints.append(QuadraticConstraint(
            np.diag(mask) / data.budgets[ap], np.zeros(n), rhs=1.0,
            name=f"budget[{ap}]", check_psd=False,
        ))

    for k in range(data.num_users):
        if np.isfinite(data.ipd_caps[k]):
            constraints.append(QuadraticConstraint(
                data.ipd_scale * data.noise[k] * data.stream_gram[k] / data.ipd_caps[k],
                np.zeros(n), rhs=1.0, name=f"ipd[{k}]", check_psd=False,
            ))
    return constraints


def _sinr_constraints(data: DlProblemData, previous: np.ndarray,
                      target: float) -> List[QuadraticConstraint]:
    """Linearised SINR constraints target * interference - f_hat <= -target."""
    constraints = []
    for k in range(data.num_users):
        value, gradient = linearize_desired(previous, data.desired_vector(k))
        constraints.append(QuadraticConstraint(
            target * data.interference_gram[k],
            -gradient,
            constant=gradient @ previous - value,
            rhs=-target,
            name=f"sinr[{k}]",
            check_psd=False,
        ))
    return constraints


def sco_subproblem(data: DlProblemData, previous: np.ndarray, target: float,
                   static: Optional[List[QuadraticConstraint]] = None) -> FeasibilityResult:
    """
    Feasibility of one convexified problem, warm-started at the expansion point.

    Args:
        data: Problem data
        previous: Stacked amplitudes of the expansion point
        target: Common SINR target
        static: Prebuilt sign/budget/IPD constraints (built if None)

    Returns:
        FeasibilityResult from the phase-I solver
    """
    if static is None:
        static = _static_constraints(data)
    constraints = static + _sinr_constraints(data, previous, target)
    return qcqp_feasibility(constraints, data.dimension, start=previous)


def initial_amplitudes(data: DlProblemData) -> np.ndarray:
    """
    Uniform split of every AP budget among its users, scaled to meet the IPD caps.
    """
    served = np.bincount(data.aps, minlength=data.config.num_aps)
    amplitudes = np.sqrt(data.budgets[data.aps] / served[data.aps])
    exposure = data.ipd(amplitudes)
    with np.errstate(divide='ignore'):
        ratios = np.where(exposure > 0, data.ipd_caps / exposure, np.inf)
    return amplitudes * min(1.0, float(np.sqrt(np.min(ratios))))


def sinr_upper_bound(data: DlProblemData) -> float:
    """min_k (sum_m |g_km| sqrt(P_m))^2, an interference-free bound on the min SINR."""
    coherent = np.zeros(data.num_users)
    own = np.abs(data.gains[data.users, np.arange(data.dimension)])
    np.add.at(coherent, data.users, own * np.sqrt(data.budgets[data.aps]))
    return float(np.min(coherent) ** 2)


class _OracleCounter:
    """Wraps the SCO subproblem and keeps Newton counts for the trace."""

    def __init__(self, data: DlProblemData):
        self.data = data
        self.static = _static_constraints(data)
        self.newton_iterations = 0

    def __call__(self, previous: np.ndarray, target: float) -> FeasibilityResult:
        result = sco_subproblem(self.data, previous, target, self.static)
        self.newton_iterations += result.newton_iterations
        return result


def _bisection_inner(data, start, gamma, upper, tol_sco, tol_bisect, max_outer, trace):
    oracle = _OracleCounter(data)
    current = start
    status = FeasibilityStatus.FEASIBLE

    for outer in range(1, max_outer + 1):
        oracle.newton_iterations = 0
        found: Dict[float, FeasibilityResult] = {}

        def check(target: float) -> FeasibilityResult:
            found[target] = oracle(current, target)
            return found[target]

        result = bisection(check, gamma, upper, tol_bisect)
        if result.point is None:
            logger.warning(f"SCO iteration {outer}: previous iterate rejected; keeping it")
            status = FeasibilityStatus.NUMERICAL_FAILURE
            break
        if result.failed_calls:
            status = FeasibilityStatus.NUMERICAL_FAILURE

        improvement = result.value - gamma
        current = np.maximum(result.point, 0.0)
        gamma = result.value
        margin = found[result.value].margin
        trace.append((outer, gamma, margin, oracle.newton_iterations))
        logger.debug(
            f"SCO {outer}: gamma={gamma:.9e} phase1_margin={margin:.3e} "
            f"newton_iters={oracle.newton_iterations}"
        )
        if improvement < tol_sco * (1.0 + gamma):
            break

    return current, status


def _bisection_outer(data, start, gamma, upper, tol_bisect, max_outer, trace):
    oracle = _OracleCounter(data)
    state = {'point': start, 'calls': 0}

    def check(target: float) -> FeasibilityResult:
        oracle.newton_iterations = 0
        state['calls'] += 1
        expansion = state['point']
        result = None
        for _ in range(max_outer):
            result = oracle(expansion, target)
            if result.feasible or result.point is None:
                break
            moved = np.max(np.abs(result.point - expansion))
            expansion = result.point
            if moved <= 1e-12 * (1.0 + np.max(np.abs(expansion))):
                break
        if result.feasible:
            state['point'] = np.maximum(result.point, 0.0)
        trace.append((state['calls'], target, result.margin, oracle.newton_iterations))
        return result

    result = bisection(check, gamma, upper, tol_bisect)
    if result.point is None:
        return start, FeasibilityStatus.NUMERICAL_FAILURE
    status = (FeasibilityStatus.NUMERICAL_FAILURE if result.failed_calls
              else FeasibilityStatus.FEASIBLE)
    return np.maximum(result.point, 0.0), status


def solve_dl_maxmin(
    data: DlProblemData,
    tol_sco: float = SCO_TOLERANCE,
    tol_bisect: float = BISECTION_TOL,
    max_outer: int = MAX_OUTER_ITERATIONS,
    nesting: str = DL_LOOP_NESTING,
) -> DlSolution:
    """
    Max-min downlink powers by successive convex optimisation.

    With 'bisection_inner' every outer iteration maximises the common target
    by bisection under the expansion at the previous iterate, so the target
    never decreases; iterations stop when the gain falls below
    tol_sco * (1 + gamma) or after max_outer. 'bisection_outer' bisects the
    target and, per target, re-linearises until a subproblem is feasible.

    Args:
        data: Problem data
        tol_sco: Relative stopping tolerance of the outer loop
        tol_bisect: Relative bisection tolerance
        max_outer: Outer iteration cap
        nesting: 'bisection_inner' or 'bisection_outer'

    Returns:
        DlSolution with trace rows (outer_iter, gamma, phase1_margin, newton_iters)
    """
    start = initial_amplitudes(data)
    gamma = float(np.min(data.sinr(start))) if data.dimension else 0.0
    upper = sinr_upper_bound(data) if data.dimension else 0.0
    trace: List[Tuple[int, float, float, int]] = [(0, gamma, float('nan'), 0)]
    status = FeasibilityStatus.FEASIBLE
    amplitudes = start

    if upper <= 0:
        logger.warning("A user has no downlink gain; the max-min SINR is zero")
    elif nesting == "bisection_inner":
        amplitudes, status = _bisection_inner(
            data, start, gamma, max(upper, gamma), tol_sco, tol_bisect, max_outer, trace
        )
    elif nesting == "bisection_outer":
        amplitudes, status = _bisection_outer(
            data, start, gamma, max(upper, gamma), tol_bisect, max_outer, trace
        )
    else:
        raise ValueError(f"Unknown loop nesting: {nesting}")

    achieved = float(np.min(data.sinr(amplitudes))) if data.dimension else 0.0
    config = data.config
    return DlSolution(
        powers=data.to_powers(amplitudes),
        gamma=achieved,
        min_rate=rate(achieved, config.dl_symbols, config.coherence_block, config.bandwidth),
        status=status,
        trace=trace,
    )
