"""Data models and validation logic."""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import (
    AP_HEIGHT_M, AP_JITTER, AP_LAYOUT, AP_POWER_DBM, AREA_SIDE_M,
    ANTENNA_SPACING_WAVELENGTHS, ANTENNAS_PER_AP, ASSOCIATION_SIZE,
    BANDWIDTH_HZ, BASELINES_RESPECT_EMF, BISECTION_TOL, CARRIER_FREQUENCY_HZ, COHERENCE_BLOCK,
    DEPLOYMENTS, DIRECTIONS,
    DL_LOOP_NESTING, FPC_EXPONENT, IPD_CAP_W_M2, MASTER_SEED, NOISE_PSD_DBM_HZ,
    MAX_OUTER_ITERATIONS, NUM_APS, NUM_BODY_PARTS, NUM_DROPS, NUM_USERS, PILOT_PAIRING,
    PILOT_POWER_DBM, RECORD_TIMING, SAR_CAP_W_KG, SAR_COEFF_PER_KG, SCHEMES, SCO_TOLERANCE,
    SHADOWING_STD_DB, SPEED_OF_LIGHT, UL_POWER_BUDGET_DBM, USER_HEIGHT_M,
)
from units import dbm_to_watts

DEFAULT_AP_POWER_W = float(dbm_to_watts(AP_POWER_DBM))
DEFAULT_UL_POWER_W = float(dbm_to_watts(UL_POWER_BUDGET_DBM))
DEFAULT_PILOT_POWER_W = float(dbm_to_watts(PILOT_POWER_DBM))
DEFAULT_NOISE_PSD_W_HZ = float(dbm_to_watts(NOISE_PSD_DBM_HZ))


class ValidationError(Exception):
    """Raised when configuration or model validation fails."""
    pass


class ConfigError(ValidationError):
    """Raised when a configuration file cannot be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DegenerateLinkError(ValueError):
    """Raised for an active link or user without usable channel gain."""
    pass


class EstimationError(ArithmeticError):
    """Raised when an observation covariance cannot be inverted reliably."""
    pass


class SolverError(RuntimeError):
    """Raised when a power-control solve cannot produce an allocation."""
    pass


class DeploymentMode(Enum):
    """Network deployment types."""
    CELL_FREE = "cell_free"
    MULTI_CELL = "multi_cell"


class Direction(Enum):
    """Transmission directions."""
    DL = "dl"
    UL = "ul"


class SchemeId(Enum):
    """Power-control schemes."""
    OPC = "opc"  # EMF-constrained max-min optimization
    UO = "uo"    # max-min optimization without the exposure constraint
    UPC = "upc"
    PPC = "ppc"  # downlink only
    FPC = "fpc"  # uplink only

    def supports(self, direction: Direction) -> bool:
        """Check whether the scheme is defined for a direction."""
        if self is SchemeId.PPC:
            return direction is Direction.DL
        if self is SchemeId.FPC:
            return direction is Direction.UL
        return True


class FeasibilityStatus(Enum):
    """Outcome of a feasibility check."""
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


def _frozen_array(values, dtype=float) -> np.ndarray:
    """Copy values into a read-only array."""
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class NetworkConfig:
    """Geometry, frame structure and radio parameters of one deployment."""
    area_side: float = AREA_SIDE_M
    num_users: int = NUM_USERS
    num_aps: int = NUM_APS
    antennas_per_ap: int = ANTENNAS_PER_AP
    association_size: int = ASSOCIATION_SIZE
    carrier_frequency: float = CARRIER_FREQUENCY_HZ
    bandwidth: float = BANDWIDTH_HZ
    dl_power_budget: float = DEFAULT_AP_POWER_W  # per AP
    ul_power_budget: float = DEFAULT_UL_POWER_W  # per user
    pilot_power: float = DEFAULT_PILOT_POWER_W  # per user
    noise_psd: float = DEFAULT_NOISE_PSD_W_HZ
    coherence_block: int = COHERENCE_BLOCK
    pilot_length: Optional[int] = None  # defaults to ceil(K/2)
    dl_symbols: Optional[int] = None    # defaults to (tau_c - tau_p) // 2
    ul_symbols: Optional[int] = None
    deployment_mode: DeploymentMode = DeploymentMode.CELL_FREE
    ap_height: float = AP_HEIGHT_M
    user_height: float = USER_HEIGHT_M
    ap_layout: str = AP_LAYOUT
    ap_jitter: float = AP_JITTER
    antenna_spacing: float = ANTENNA_SPACING_WAVELENGTHS
    shadowing_std_db: float = SHADOWING_STD_DB
    pilot_pairing: str = PILOT_PAIRING

    def __post_init__(self):
        """Fill the derived frame structure and validate."""
        if self.pilot_length is None and self.num_users >= 1:
            object.__setattr__(self, 'pilot_length', math.ceil(self.num_users / 2))
        remaining = self.coherence_block - (self.pilot_length or 0)
        if self.dl_symbols is None:
            object.__setattr__(self, 'dl_symbols', remaining // 2)
        if self.ul_symbols is None:
            object.__setattr__(self, 'ul_symbols', remaining // 2)
        self._validate()

    def _validate(self):
        """Validate configuration values."""
        errors = []

        for name in ('num_users', 'num_aps', 'antennas_per_ap', 'association_size',
                     'coherence_block'):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be at least 1, got {getattr(self, name)}")

        if self.association_size > self.num_aps:
            errors.append(
                f"association_size ({self.association_size}) exceeds "
                f"num_aps ({self.num_aps})"
            )

        for name in ('area_side', 'carrier_frequency', 'bandwidth', 'dl_power_budget',
                     'ul_power_budget', 'pilot_power', 'noise_psd', 'antenna_spacing'):
            value = getattr(self, name)
            if not value > 0 or not math.isfinite(value):
                errors.append(f"{name} must be strictly positive, got {value}")

        if self.pilot_length is not None and self.pilot_length < 1:
            errors.append(f"pilot_length must be at least 1, got {self.pilot_length}")
        if self.dl_symbols < 0 or self.ul_symbols < 0:
            errors.append("dl_symbols and ul_symbols must be non-negative")
        elif (self.pilot_length or 0) + self.dl_symbols + self.ul_symbols > self.coherence_block:
            errors.append(
                f"pilot_length + dl_symbols + ul_symbols "
                f"({self.pilot_length} + {self.dl_symbols} + {self.ul_symbols}) "
                f"exceeds coherence_block ({self.coherence_block})"
            )

        if self.ap_height < 0 or self.user_height < 0:
            errors.append("antenna heights must be non-negative")
        if not 0 <= self.ap_jitter < 0.5:
            errors.append(f"ap_jitter must lie in [0, 0.5), got {self.ap_jitter}")
        if self.ap_layout not in ('grid', 'random'):
            errors.append(f"Unknown ap_layout: {self.ap_layout}")
        if self.pilot_pairing not in ('max_distance', 'random'):
            errors.append(f"Unknown pilot_pairing: {self.pilot_pairing}")
        if self.shadowing_std_db < 0:
            errors.append("shadowing_std_db must be non-negative")
        if (self.deployment_mode is DeploymentMode.MULTI_CELL
                and self.association_size != 1):
            errors.append("multi-cell deployments associate each user to one BS")

        if errors:
            raise ValidationError("\n".join(errors))

    @property
    def wavelength(self) -> float:
        """Carrier wavelength in m."""
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def noise_power(self) -> float:
        """Receiver noise power N_o * B in W (same at users and APs)."""
        return self.noise_psd * self.bandwidth

    @property
    def total_antennas(self) -> int:
        return self.num_aps * self.antennas_per_ap

    def prelog(self, direction: Direction) -> float:
        """Fraction of the coherence block used for data in a direction."""
        symbols = self.dl_symbols if direction is Direction.DL else self.ul_symbols
        return symbols / self.coherence_block

    def with_num_users(self, num_users: int) -> 'NetworkConfig':
        """Copy with a new user count and re-derived pilot/data split."""
        return replace(
            self,
            num_users=num_users,
            pilot_length=None,
            dl_symbols=None,
            ul_symbols=None,
        )


@dataclass(frozen=True)
class ExposureLimits:
    """Exposure caps (IPD per user, SAR per user and body part)."""
    ipd_caps: np.ndarray   # K, W/m^2
    sar_caps: np.ndarray   # K x n, W/kg
    sar_coeffs: np.ndarray  # K x n, 1/kg

    def __post_init__(self):
        """Freeze arrays and validate."""
        object.__setattr__(self, 'ipd_caps', _frozen_array(self.ipd_caps).reshape(-1))
        object.__setattr__(self, 'sar_caps', _frozen_array(np.atleast_2d(self.sar_caps)))
        object.__setattr__(self, 'sar_coeffs', _frozen_array(np.atleast_2d(self.sar_coeffs)))
        self._validate()

    def _validate(self):
        """Validate exposure limits."""
        errors = []
        if self.sar_caps.shape != self.sar_coeffs.shape:
            errors.append(
                f"sar_caps {self.sar_caps.shape} and sar_coeffs "
                f"{self.sar_coeffs.shape} must share shape"
            )
        elif self.sar_caps.shape[0] != self.ipd_caps.shape[0]:
            errors.append("IPD and SAR limits must cover the same users")
        for name in ('ipd_caps', 'sar_caps', 'sar_coeffs'):
            values = getattr(self, name)
            if np.any(np.isnan(values)) or np.any(values <= 0):
                errors.append(f"{name} entries must be strictly positive")
        if errors:
            raise ValidationError("\n".join(errors))

    @classmethod
    def uniform(
        cls,
        num_users: int,
        ipd_cap: float = IPD_CAP_W_M2,
        sar_cap: float = SAR_CAP_W_KG,
        sar_coeff: float = SAR_COEFF_PER_KG,
        num_body_parts: int = NUM_BODY_PARTS,
    ) -> 'ExposureLimits':
        """Same caps for every user and body part."""
        shape = (num_users, num_body_parts)
        return cls(
            ipd_caps=np.full(num_users, ipd_cap),
            sar_caps=np.full(shape, sar_cap),
            sar_coeffs=np.full(shape, sar_coeff),
        )

    @classmethod
    def unconstrained(cls, num_users: int, num_body_parts: int = 1) -> 'ExposureLimits':
        """Limits that never bind (used by the UO scheme)."""
        return cls.uniform(num_users, np.inf, np.inf, SAR_COEFF_PER_KG, num_body_parts)

    @property
    def num_users(self) -> int:
        return self.ipd_caps.shape[0]

    def relaxed(self) -> 'ExposureLimits':
        """Copy with all caps removed but the same SAR coefficients."""
        return ExposureLimits(
            ipd_caps=np.full(self.num_users, np.inf),
            sar_caps=np.full(self.sar_caps.shape, np.inf),
            sar_coeffs=self.sar_coeffs,
        )

    def broadcast(self, num_users: int) -> 'ExposureLimits':
        """Resize homogeneous limits to another user count (first user's row)."""
        if num_users == self.num_users:
            return self
        return ExposureLimits(
            ipd_caps=np.full(num_users, self.ipd_caps[0]),
            sar_caps=np.tile(self.sar_caps[0], (num_users, 1)),
            sar_coeffs=np.tile(self.sar_coeffs[0], (num_users, 1)),
        )

    def ul_power_caps(self, budgets: np.ndarray) -> np.ndarray:
        """Fold the SAR caps into per-user power bounds: min(Q_k, min_n E/b)."""
        sar_bound = np.min(self.sar_caps / self.sar_coeffs, axis=1)
        return np.minimum(np.broadcast_to(budgets, sar_bound.shape), sar_bound)


@dataclass(frozen=True)
class Scenario:
    """One network drop: positions, large-scale statistics and association."""
    config: NetworkConfig
    ap_positions: np.ndarray     # M x 2, m
    user_positions: np.ndarray   # K x 2, m
    distances: np.ndarray        # K x M, 3-D distance zeta, m
    large_scale: np.ndarray      # K x M, alpha (linear gain)
    rician_factors: np.ndarray   # K x M, beta
    aoas: np.ndarray             # K x M, theta, rad
    los_states: np.ndarray       # K x M, bool
    association: np.ndarray      # K x M, {0, 1}

    def __post_init__(self):
        """Freeze arrays and validate."""
        for name in ('ap_positions', 'user_positions', 'distances', 'large_scale',
                     'rician_factors', 'aoas'):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        object.__setattr__(self, 'los_states', _frozen_array(self.los_states, bool))
        object.__setattr__(self, 'association', _frozen_array(self.association, int))
        self._validate()

    def _validate(self):
        """Validate scenario arrays."""
        errors = []
        shape = (self.config.num_users, self.config.num_aps)
        for name in ('distances', 'large_scale', 'rician_factors', 'aoas',
                     'los_states', 'association'):
            if getattr(self, name).shape != shape:
                errors.append(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if errors:
            raise ValidationError("\n".join(errors))

        if not np.all(np.isin(self.association, (0, 1))):
            errors.append("association entries must be 0 or 1")
        if np.any(self.association.sum(axis=1) != self.config.association_size):
            errors.append(
                f"every user must be associated with exactly "
                f"{self.config.association_size} access point(s)"
            )
        if np.any(self.large_scale <= 0):
            errors.append("large-scale coefficients must be strictly positive")
        if np.any(self.rician_factors < 0):
            errors.append("Rician factors must be non-negative")
        if errors:
            raise ValidationError("\n".join(errors))

    @property
    def num_users(self) -> int:
        return self.config.num_users

    @property
    def num_aps(self) -> int:
        return self.config.num_aps

    def served_users(self, ap: int) -> np.ndarray:
        """Indices of the users associated with an AP."""
        return np.flatnonzero(self.association[:, ap])


@dataclass(frozen=True)
class LinkState:
    """Large-scale state of one user-AP link."""
    alpha: float
    beta: float
    theta: float
    phase_offset: float = 0.0
    distance: float = 1.0

    def __post_init__(self):
        """Validate link parameters."""
        errors = []
        if not self.alpha > 0:
            errors.append(f"alpha must be strictly positive, got {self.alpha}")
        if not 0 <= self.beta < np.inf:
            errors.append(f"beta must be finite and non-negative, got {self.beta}")
        if not 0 <= self.phase_offset < 2 * np.pi:
            errors.append(f"phase_offset must lie in [0, 2pi), got {self.phase_offset}")
        if errors:
            raise ValidationError("\n".join(errors))


@dataclass(frozen=True)
class ChannelSet:
    """True channels, their covariances and (optionally) LMMSE estimates."""
    true_channels: np.ndarray         # K x M x L complex
    covariances: np.ndarray           # K x M x L x L complex Hermitian
    phase_offsets: np.ndarray         # K x M, psi
    estimates: Optional[np.ndarray] = None  # K x M x L complex

    @property
    def shape(self):
        return self.true_channels.shape

    def with_estimates(self, estimates: np.ndarray) -> 'ChannelSet':
        """Copy carrying channel estimates."""
        if estimates.shape != self.true_channels.shape:
            raise ValidationError(
                f"estimates shape {estimates.shape} does not match channels "
                f"{self.true_channels.shape}"
            )
        return replace(self, estimates=estimates)

    def select(self, use_estimates: bool) -> np.ndarray:
        """Channels used for design (estimates) or evaluation (true)."""
        if not use_estimates:
            return self.true_channels
        if self.estimates is None:
            raise ValidationError("channel estimates have not been computed")
        return self.estimates


@dataclass(frozen=True)
class PilotBook:
    """Orthonormal pilot basis and the user-to-pilot assignment."""
    basis: np.ndarray       # tau_p x tau_p unitary, columns are pilots
    assignment: np.ndarray  # K, pilot index per user

    @property
    def pilot_length(self) -> int:
        return self.basis.shape[0]

    @property
    def pilots(self) -> np.ndarray:
        """K x tau_p matrix whose row k is t_k."""
        return self.basis[:, self.assignment].T

    def cross_correlation(self) -> np.ndarray:
        """K x K matrix of t_k^H t_j."""
        pilots = self.pilots
        return pilots.conj() @ pilots.T

    def sharers(self, user: int) -> np.ndarray:
        """Users (including `user`) that transmit the same pilot."""
        return np.flatnonzero(self.assignment == self.assignment[user])


@dataclass(frozen=True)
class PilotObservation:
    """Per-link pilot observations u_{k,m} (K x M x L)."""
    observations: np.ndarray


@dataclass(frozen=True)
class BeamformerSet:
    """Unit-norm DL beams and UL combining filters (K x M x L)."""
    dl_beams: np.ndarray
    ul_filters: np.ndarray


@dataclass
class PowerAllocation:
    """DL per-link powers and/or UL per-user powers in W."""
    dl_powers: Optional[np.ndarray] = None  # K x M
    ul_powers: Optional[np.ndarray] = None  # K

    def __post_init__(self):
        """Validate power values."""
        errors = []
        for name in ('dl_powers', 'ul_powers'):
            values = getattr(self, name)
            if values is not None:
                values = np.asarray(values, dtype=float)
                setattr(self, name, values)
                if np.any(values < 0) or np.any(np.isnan(values)):
                    errors.append(f"{name} must be non-negative")
        if errors:
            raise ValidationError("\n".join(errors))

    @property
    def sqrt_powers(self) -> np.ndarray:
        """Amplitudes phi = sqrt(p) for the DL allocation."""
        return np.sqrt(self.dl_powers)


@dataclass
class UserMetrics:
    """Per-user link metrics for one direction."""
    direction: Direction
    sinr: np.ndarray
    rate: np.ndarray
    ipd: Optional[np.ndarray] = None   # DL only, W/m^2
    sar: Optional[np.ndarray] = None   # UL only, W/kg (K x body parts)

    @property
    def min_rate(self) -> float:
        return float(np.min(self.rate))


@dataclass
class CampaignSpec:
    """Everything needed to run a Monte-Carlo campaign deterministically."""
    base: NetworkConfig = field(default_factory=NetworkConfig)
    limits: Optional[ExposureLimits] = None
    schemes: List[SchemeId] = field(default_factory=lambda: [SchemeId(s) for s in SCHEMES])
    deployments: List[DeploymentMode] = field(
        default_factory=lambda: [DeploymentMode(d) for d in DEPLOYMENTS])
    directions: List[Direction] = field(default_factory=lambda: [Direction(d) for d in DIRECTIONS])
    num_drops: int = NUM_DROPS
    master_seed: int = MASTER_SEED
    sweeps: Dict[str, List[float]] = field(default_factory=dict)
    fpc_exponent: float = FPC_EXPONENT
    baselines_respect_emf: bool = BASELINES_RESPECT_EMF
    dl_loop_nesting: str = DL_LOOP_NESTING
    sco_tolerance: float = SCO_TOLERANCE
    bisection_tolerance: float = BISECTION_TOL
    max_outer_iterations: int = MAX_OUTER_ITERATIONS
    record_timing: bool = RECORD_TIMING

    SWEEP_KEYS = ("num_users", "sar_cap")

    def __post_init__(self):
        """Fill default limits and validate."""
        if self.limits is None:
            self.limits = ExposureLimits.uniform(self.base.num_users)
        self._validate()

    def _validate(self):
        """Validate campaign settings."""
        errors = []
        if self.num_drops < 1:
            errors.append(f"num_drops must be at least 1, got {self.num_drops}")
        if self.master_seed < 0:
            errors.append(f"master_seed must be non-negative, got {self.master_seed}")
        for key, values in self.sweeps.items():
            if key not in self.SWEEP_KEYS:
                errors.append(f"Unknown sweep parameter: {key}")
            elif len(values) == 0:
                errors.append(f"Sweep grid for {key} is empty")
        if not self.schemes:
            errors.append("At least one scheme is required")
        if not self.deployments:
            errors.append("At least one deployment is required")
        if not self.directions:
            errors.append("At least one direction is required")
        if self.base.deployment_mode is not DeploymentMode.CELL_FREE:
            errors.append("The base configuration must describe the cell-free deployment")
        if not -1.0 <= self.fpc_exponent <= 1.0:
            errors.append(f"fpc_exponent must lie in [-1, 1], got {self.fpc_exponent}")
        if self.dl_loop_nesting not in ('bisection_inner', 'bisection_outer'):
            errors.append(f"Unknown dl_loop_nesting: {self.dl_loop_nesting}")
        if errors:
            raise ValidationError("\n".join(errors))

    def sweep_points(self) -> List[Dict[str, float]]:
        """Cartesian product of the sweep grids (one empty point if none)."""
        points: List[Dict[str, float]] = [{}]
        for key in self.SWEEP_KEYS:
            if key in self.sweeps:
                points = [
                    {**point, key: value}
                    for point in points
                    for value in self.sweeps[key]
                ]
        return points


def scheme_list(values: Sequence[str]) -> List[SchemeId]:
    """Parse scheme names ('opc', 'uo', ...)."""
    return [SchemeId(value.strip().lower()) for value in values]
