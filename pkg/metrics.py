"""Beamformers, SINRs, rates and exposure metrics.

All functions take the channel source explicitly: power control designs on
estimates, reported metrics are re-evaluated on the true channels.
"""

from typing import Union

import numpy as np

from logger import LogManager
from models import (
    BeamformerSet, ChannelSet, DegenerateLinkError, Direction, ExposureLimits,
    NetworkConfig, PowerAllocation, UserMetrics,
)

logger = LogManager().get_logger("metrics")

ArrayLike = Union[float, np.ndarray]


def conjugate_beamformer(estimate: np.ndarray) -> np.ndarray:
    """
    Unit-norm conjugate beam collinear with the estimate.

    Raises:
        DegenerateLinkError: If the estimate is zero
    """
    norm = np.linalg.norm(estimate)
    if norm == 0:
        raise DegenerateLinkError("Cannot beamform towards a zero channel estimate")
    return np.asarray(estimate) / norm


def conjugate_beamformers(estimates: np.ndarray, association: np.ndarray) -> BeamformerSet:
    """
    Conjugate beams and filters b = f = h_hat / ||h_hat|| for every link.

    Inactive links with zero estimates get zero beams.

    Raises:
        DegenerateLinkError: If an active link has a zero estimate
    """
    norms = np.linalg.norm(estimates, axis=-1)
    degenerate = (norms == 0) & (np.asarray(association) == 1)
    if np.any(degenerate):
        users, aps = np.nonzero(degenerate)
        raise DegenerateLinkError(
            f"Zero channel estimate on active link(s) {list(zip(users.tolist(), aps.tolist()))}"
        )
    safe = np.where(norms > 0, norms, 1.0)
    beams = estimates / safe[..., None]
    return BeamformerSet(dl_beams=beams, ul_filters=beams.copy())


def cross_gains(channels: np.ndarray, beams: np.ndarray) -> np.ndarray:
    """G[k, j, m] = h_{k,m}^H b_{j,m}, shape K x K x M."""
    return np.einsum('kml,jml->kjm', channels.conj(), beams)


def dl_amplitude_gains(
    channels: np.ndarray,
    beams: np.ndarray,
    association: np.ndarray,
    powers: np.ndarray,
) -> np.ndarray:
    """A[k, j] = sum_m a_{j,m} sqrt(p_{j,m}) h_{k,m}^H b_{j,m}, the signal of j seen at k."""
    weights = np.asarray(association) * np.sqrt(np.asarray(powers, dtype=float))
    return np.einsum('kjm,jm->kj', cross_gains(channels, beams), weights)


def dl_sinr(
    channels: np.ndarray,
    beams: np.ndarray,
    association: np.ndarray,
    powers: np.ndarray,
    noise_power: ArrayLike,
) -> np.ndarray:
    """
    Downlink SINR of every user.

    Args:
        channels: K x M x L channels (true or estimated)
        beams: K x M x L unit-norm beams
        association: K x M binary matrix
        powers: K x M powers in W
        noise_power: sigma^2 (scalar or K values)

    Returns:
        K SINR values
    """
    received = np.abs(dl_amplitude_gains(channels, beams, association, powers)) ** 2
    desired = np.diag(received)
    interference = received.sum(axis=1) - desired
    return desired / (interference + noise_power)


def ul_combined_gains(
    channels: np.ndarray,
    filters: np.ndarray,
    association: np.ndarray,
) -> np.ndarray:
    """U[k, j] = sum_m a_{k,m} f_{k,m}^H h_{j,m}, user j as combined for user k."""
    combined = np.einsum('kml,jml->kjm', filters.conj(), channels)
    return np.einsum('kjm,km->kj', combined, np.asarray(association))


def ul_noise_gains(filters: np.ndarray, association: np.ndarray,
                   noise_power: ArrayLike) -> np.ndarray:
    """N_k = sum_m a_{k,m} eta_m^2 ||f_{k,m}||^2."""
    filter_energy = np.sum(np.abs(filters) ** 2, axis=-1)
    eta2 = np.broadcast_to(np.asarray(noise_power, dtype=float), filter_energy.shape[1:])
    return np.sum(np.asarray(association) * filter_energy * eta2, axis=1)


def ul_sinr(
    channels: np.ndarray,
    filters: np.ndarray,
    association: np.ndarray,
    powers: np.ndarray,
    noise_power: ArrayLike,
) -> np.ndarray:
    """
    Uplink SINR of every user after combining over its serving APs.

    Args:
        channels: K x M x L channels (true or estimated)
        filters: K x M x L combining filters
        association: K x M binary matrix
        powers: K transmit powers in W
        noise_power: eta^2 (scalar or M values)

    Returns:
        K SINR values
    """
    powers = np.asarray(powers, dtype=float)
    received = np.abs(ul_combined_gains(channels, filters, association)) ** 2 * powers[None, :]
    desired = np.diag(received)
    interference = received.sum(axis=1) - desired
    return desired / (interference + ul_noise_gains(filters, association, noise_power))


def ipd(
    channels: np.ndarray,
    beams: np.ndarray,
    association: np.ndarray,
    powers: np.ndarray,
    wavelength: float,
) -> np.ndarray:
    """
    Incident power density at every user, in W/m^2.

    Sums the desired and all interfering streams: (4 pi / lambda^2) sum_j |A[k, j]|^2.
    """
    received = np.abs(dl_amplitude_gains(channels, beams, association, powers)) ** 2
    return 4.0 * np.pi / wavelength ** 2 * received.sum(axis=1)


def sar(ul_power: ArrayLike, sar_coeff: ArrayLike) -> ArrayLike:
    """
    SAR b * q in W/kg.

    A K-vector of powers against a K x n coefficient matrix gives K x n values.
    """
    q = np.asarray(ul_power, dtype=float)
    b = np.asarray(sar_coeff, dtype=float)
    if b.ndim == q.ndim + 1:
        q = q[..., None]
    product = q * b
    return float(product) if product.ndim == 0 else product


def rate(sinr: ArrayLike, prelog_symbols: int, coherence_block: int,
         bandwidth: float) -> ArrayLike:
    """Achievable rate (prelog / tau_c) * B * log2(1 + sinr) in bit/s."""
    values = prelog_symbols / coherence_block * bandwidth * np.log2(1.0 + np.asarray(sinr))
    return float(values) if np.ndim(values) == 0 else values


def sinr_for_rate(target_rate: ArrayLike, prelog_symbols: int, coherence_block: int,
                  bandwidth: float) -> ArrayLike:
    """Inverse of rate(): the SINR needed for a target rate."""
    exponent = np.asarray(target_rate) * coherence_block / (prelog_symbols * bandwidth)
    values = np.exp2(exponent) - 1.0
    return float(values) if np.ndim(values) == 0 else values


def evaluate_user_metrics(
    channels: ChannelSet,
    beams: BeamformerSet,
    association: np.ndarray,
    allocation: PowerAllocation,
    config: NetworkConfig,
    limits: ExposureLimits,
    direction: Direction,
    use_estimates: bool = False,
) -> UserMetrics:
    """
    Evaluate SINR, rate and exposure of every user for one direction.

    Args:
        channels: Channel set (true channels are used unless use_estimates)
        beams: Beams and filters designed on the estimates
        association: K x M binary matrix
        allocation: Powers for the requested direction
        config: Supplies noise, wavelength and frame structure
        limits: Supplies the SAR coefficients
        direction: DL or UL
        use_estimates: Evaluate on the estimates instead of the true channels

    Returns:
        UserMetrics for the direction (ipd for DL, sar for UL)
    """
    h = channels.select(use_estimates)

    if direction is Direction.DL:
        if allocation.dl_powers is None:
            raise ValueError("Allocation carries no downlink powers")
        sinr = dl_sinr(h, beams.dl_beams, association, allocation.dl_powers,
                       config.noise_power)
        return UserMetrics(
            direction=direction,
            sinr=sinr,
            rate=rate(sinr, config.dl_symbols, config.coherence_block, config.bandwidth),
            ipd=ipd(h, beams.dl_beams, association, allocation.dl_powers, config.wavelength),
        )

    if allocation.ul_powers is None:
        raise ValueError("Allocation carries no uplink powers")
    sinr = ul_sinr(h, beams.ul_filters, association, allocation.ul_powers, config.noise_power)
    return UserMetrics(
        direction=direction,
        sinr=sinr,
        rate=rate(sinr, config.ul_symbols, config.coherence_block, config.bandwidth),
        sar=sar(allocation.ul_powers, limits.sar_coeffs),
    )
