"""Rician propagation model for user-AP links.

Implements the 3GPP micro-urban LoS probability and path loss, the
distance-dependent Rician factor beta = p_LoS / (1 - p_LoS), uniform linear
array steering vectors, and the Rician channel

    h = sqrt(alpha / (1 + beta)) * (h_bar + sqrt(beta) * exp(j psi) * v(theta))

together with its covariance alpha / (1 + beta) * (I + beta v v^H).
Vectorised variants work on arrays with arbitrary leading shape; the
scalar-link variants wrap them.
"""

from typing import Union

import numpy as np

from config import (
    ANTENNA_SPACING_WAVELENGTHS,
    LOS_PROBABILITY_CAP,
    MIN_PATHLOSS_DISTANCE_M,
)
from logger import LogManager
from models import ChannelSet, LinkState, Scenario

logger = LogManager().get_logger("channel")

ArrayLike = Union[float, np.ndarray]


def _scalar_or_array(values: np.ndarray) -> ArrayLike:
    return float(values) if values.ndim == 0 else values


def los_probability(distance: ArrayLike) -> ArrayLike:
    """
    Probability of line of sight for the UMi scenario.

    Args:
        distance: Link distance in m (scalar or array)

    Returns:
        min(18/d, 1) * (1 - exp(-d/36)) + exp(-d/36), clamped to
        [0, LOS_PROBABILITY_CAP]

    Raises:
        ValueError: If any distance is not strictly positive
    """
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("LoS probability needs strictly positive distances")

    decay = np.exp(-d / 36.0)
    p = np.minimum(18.0 / d, 1.0) * (1.0 - decay) + decay
    return _scalar_or_array(np.clip(p, 0.0, LOS_PROBABILITY_CAP))


def rician_factor(p_los: ArrayLike) -> ArrayLike:
    """
    Rician factor beta = p / (1 - p).

    Raises:
        ValueError: If p_los lies outside [0, 1)
    """
    p = np.asarray(p_los, dtype=float)
    if np.any(p < 0) or np.any(p >= 1):
        raise ValueError("LoS probability must lie in [0, 1) for a finite Rician factor")
    return _scalar_or_array(p / (1.0 - p))


def path_loss_db(distance: ArrayLike, is_los: Union[bool, np.ndarray],
                 carrier_frequency: float) -> ArrayLike:
    """UMi path loss in dB; distances below 1 m are clamped."""
    d = np.maximum(np.asarray(distance, dtype=float), MIN_PATHLOSS_DISTANCE_M)
    f_ghz = carrier_frequency / 1e9
    los_db = 22.0 * np.log10(d) + 28.0 + 20.0 * np.log10(f_ghz)
    nlos_db = 36.7 * np.log10(d) + 22.7 + 26.0 * np.log10(f_ghz)
    return _scalar_or_array(np.where(is_los, los_db, nlos_db))


def path_loss(distance: ArrayLike, is_los: Union[bool, np.ndarray],
              carrier_frequency: float) -> ArrayLike:
    """
    UMi large-scale gain 10^(-PL/10).

    Args:
        distance: Link distance in m
        is_los: LoS state selecting the formula (broadcast against distance)
        carrier_frequency: Carrier frequency in Hz

    Returns:
        Linear gain (scalar or array)
    """
    pl_db = np.asarray(path_loss_db(distance, is_los, carrier_frequency))
    return _scalar_or_array(10.0 ** (-pl_db / 10.0))


def steering_vectors(num_antennas: int, theta: ArrayLike,
                     spacing: float = ANTENNA_SPACING_WAVELENGTHS) -> np.ndarray:
    """ULA responses for an array of angles, shape theta.shape + (L,)."""
    theta = np.asarray(theta, dtype=float)
    phase = 2.0 * np.pi * spacing * np.sin(theta)[..., None] * np.arange(num_antennas)
    return np.exp(1j * phase)


def steering_vector(num_antennas: int, theta: float,
                    spacing: float = ANTENNA_SPACING_WAVELENGTHS) -> np.ndarray:
    """
    ULA steering vector with entries exp(j 2 pi s l sin(theta)), l = 0..L-1.

    Raises:
        ValueError: If num_antennas < 1
    """
    if num_antennas < 1:
        raise ValueError(f"Need at least one antenna, got {num_antennas}")
    return steering_vectors(num_antennas, theta, spacing)


def draw_channels(
    alpha: np.ndarray,
    beta: np.ndarray,
    theta: np.ndarray,
    psi: np.ndarray,
    num_antennas: int,
    rng: np.random.Generator,
    spacing: float = ANTENNA_SPACING_WAVELENGTHS,
) -> np.ndarray:
    """
    Draw Rician channels for arrays of links.

    Args:
        alpha, beta, theta, psi: Link parameters sharing one shape S
        num_antennas: Antennas per AP (L)
        rng: Random generator owned by the caller
        spacing: Antenna spacing in wavelengths

    Returns:
        Complex array of shape S + (L,)
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    shape = alpha.shape + (num_antennas,)
    h_bar = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    los = (
        np.sqrt(beta)[..., None]
        * np.exp(1j * np.asarray(psi, dtype=float))[..., None]
        * steering_vectors(num_antennas, theta, spacing)
    )
    return np.sqrt(alpha / (1.0 + beta))[..., None] * (h_bar + los)


def draw_channel(link: LinkState, num_antennas: int, rng: np.random.Generator,
                 spacing: float = ANTENNA_SPACING_WAVELENGTHS) -> np.ndarray:
    """Draw one link's channel vector (the LoS phase comes from the link)."""
    return draw_channels(
        np.asarray(link.alpha), np.asarray(link.beta), np.asarray(link.theta),
        np.asarray(link.phase_offset), num_antennas, rng, spacing,
    )


def covariances(
    alpha: np.ndarray,
    beta: np.ndarray,
    theta: np.ndarray,
    num_antennas: int,
    spacing: float = ANTENNA_SPACING_WAVELENGTHS,
) -> np.ndarray:
    """Channel covariances for arrays of links, shape S + (L, L)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    v = steering_vectors(num_antennas, theta, spacing)
    outer = v[..., :, None] * v[..., None, :].conj()
    scale = (alpha / (1.0 + beta))[..., None, None]
    return scale * (np.eye(num_antennas) + beta[..., None, None] * outer)


def channel_covariance(link: LinkState, num_antennas: int,
                       spacing: float = ANTENNA_SPACING_WAVELENGTHS) -> np.ndarray:
    """L x L covariance of a link; trace equals alpha * L."""
    return covariances(
        np.asarray(link.alpha), np.asarray(link.beta), np.asarray(link.theta),
        num_antennas, spacing,
    )


def covariance_set(scenario: Scenario) -> np.ndarray:
    """Covariances of every user-AP link, K x M x L x L."""
    config = scenario.config
    return covariances(
        scenario.large_scale, scenario.rician_factors, scenario.aoas,
        config.antennas_per_ap, config.antenna_spacing,
    )


def draw_channel_set(scenario: Scenario, rng: np.random.Generator) -> ChannelSet:
    """
    Draw the true channels of a drop.

    The LoS phase psi is drawn uniformly in [0, 2 pi) per link, then the
    NLoS components; estimates are left empty.
    """
    config = scenario.config
    shape = (config.num_users, config.num_aps)
    psi = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    channels = draw_channels(
        scenario.large_scale, scenario.rician_factors, scenario.aoas, psi,
        config.antennas_per_ap, rng, config.antenna_spacing,
    )
    logger.debug(
        f"Drew {shape[0]}x{shape[1]} channels with {config.antennas_per_ap} antennas"
    )
    return ChannelSet(
        true_channels=channels,
        covariances=covariance_set(scenario),
        phase_offsets=psi,
    )
