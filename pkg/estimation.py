"""Uplink pilot assignment and LMMSE channel estimation.

Pilots are the columns of a unitary DFT basis (unit norm, mutually
orthogonal). Users that share a pilot contaminate each other's estimates;
the assignment keeps sharers far apart.
"""

import math
from itertools import combinations
from typing import List, Optional

import numpy as np
from scipy.linalg import dft, solve

from config import MAX_CONDITION_NUMBER
from logger import LogManager
from models import ChannelSet, EstimationError, NetworkConfig, PilotBook, PilotObservation
from scenario import torus_displacement

logger = LogManager().get_logger("estimation")


def _pairwise_distances(user_positions: np.ndarray, side: Optional[float]) -> np.ndarray:
    positions = np.asarray(user_positions, dtype=float)
    if side is None:
        delta = positions[None, :, :] - positions[:, None, :]
    else:
        delta = torus_displacement(positions, positions, side)
    return np.hypot(delta[..., 0], delta[..., 1])


def _greedy_pairs(distances: np.ndarray, num_pairs: int) -> List[List[int]]:
    """Pick the num_pairs farthest disjoint pairs, longest first."""
    num_users = distances.shape[0]
    pairs = list(combinations(range(num_users), 2))
    pairs.sort(key=lambda pair: -distances[pair])  # sort is stable

    taken = np.zeros(num_users, dtype=bool)
    groups: List[List[int]] = []
    for i, j in pairs:
        if len(groups) == num_pairs:
            break
        if not taken[i] and not taken[j]:
            taken[i] = taken[j] = True
            groups.append([i, j])

    groups.extend([k] for k in range(num_users) if not taken[k])
    return groups


def _greedy_groups(distances: np.ndarray, num_groups: int, capacity: int) -> List[List[int]]:
    """Insert users one by one into the group where their nearest sharer is farthest."""
    groups: List[List[int]] = [[k] for k in range(min(num_groups, distances.shape[0]))]
    for user in range(num_groups, distances.shape[0]):
        open_groups = [g for g, members in enumerate(groups) if len(members) < capacity]
        best = max(open_groups, key=lambda g: (distances[user, groups[g]].min(), -g))
        groups[best].append(user)
    return groups


def assign_pilots(
    num_users: int,
    pilot_length: int,
    user_positions: np.ndarray,
    side: Optional[float] = None,
    pairing: str = "max_distance",
    rng: Optional[np.random.Generator] = None,
) -> PilotBook:
    """
    Assign orthonormal pilots so that pilot sharers are far apart.

    Args:
        num_users: K
        pilot_length: tau_p, number of orthogonal pilots
        user_positions: K x 2 points
        side: Square side for wrap-around distances (Euclidean if None)
        pairing: 'max_distance' (greedy) or 'random'
        rng: Generator for random pairing

    Returns:
        PilotBook; each pilot is used by at most ceil(K/tau_p) users

    Raises:
        ValueError: For an unknown pairing rule or non-positive pilot length
    """
    if pilot_length < 1:
        raise ValueError(f"pilot_length must be at least 1, got {pilot_length}")

    basis = dft(pilot_length) / math.sqrt(pilot_length)

    if pilot_length >= num_users:
        if pilot_length > num_users:
            logger.warning(
                f"Pilot length {pilot_length} exceeds {num_users} users; "
                f"{pilot_length - num_users} pilot(s) stay unused"
            )
        return PilotBook(basis=basis, assignment=np.arange(num_users))

    capacity = math.ceil(num_users / pilot_length)

    if pairing == "random":
        if rng is None:
            raise ValueError("Random pilot pairing needs a random generator")
        order = rng.permutation(num_users)
        assignment = np.empty(num_users, dtype=int)
        assignment[order] = np.arange(num_users) % pilot_length
        return PilotBook(basis=basis, assignment=assignment)
    if pairing != "max_distance":
        raise ValueError(f"Unknown pilot pairing: {pairing}")

    distances = _pairwise_distances(user_positions, side)
    if capacity == 2:
        groups = _greedy_pairs(distances, num_users - pilot_length)
    else:
        groups = _greedy_groups(distances, pilot_length, capacity)

    assignment = np.empty(num_users, dtype=int)
    for pilot, members in enumerate(sorted(groups, key=min)):
        assignment[members] = pilot

    logger.debug(f"Assigned {pilot_length} pilots to {num_users} users: {assignment.tolist()}")
    return PilotBook(basis=basis, assignment=assignment)


def simulate_pilot_phase(
    channels: ChannelSet,
    book: PilotBook,
    pilot_powers: np.ndarray,
    noise_variances: np.ndarray,
    rng: np.random.Generator,
) -> PilotObservation:
    """
    Simulate the de-spread pilot observations at every AP.

    u_{k,m} = sum_j sqrt(mu_j) (t_k^H t_j) h_{j,m} + n, where the noise is
    drawn per (AP, pilot) so that users sharing a pilot see the same sample.

    Args:
        channels: True channels (K x M x L)
        book: Pilot assignment
        pilot_powers: mu, K values in W
        noise_variances: eta^2, M values in W

    Returns:
        PilotObservation (K x M x L)
    """
    h = channels.true_channels
    _, num_aps, num_antennas = h.shape
    cross = book.cross_correlation()
    amplitudes = np.sqrt(np.asarray(pilot_powers, dtype=float))

    received = np.einsum('kj,j,jml->kml', cross, amplitudes, h)

    shape = (book.pilot_length, num_aps, num_antennas)
    noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    noise *= np.sqrt(np.asarray(noise_variances, dtype=float))[None, :, None]

    return PilotObservation(observations=received + noise[book.assignment])


def observation_covariances(
    covariances: np.ndarray,
    book: PilotBook,
    pilot_powers: np.ndarray,
    noise_variances: np.ndarray,
) -> np.ndarray:
    """D_{k,m} for every link, K x M x L x L."""
    weights = np.abs(book.cross_correlation()) ** 2 * np.asarray(pilot_powers, dtype=float)
    num_antennas = covariances.shape[-1]
    noise = np.asarray(noise_variances, dtype=float)[None, :, None, None] * np.eye(num_antennas)
    return np.einsum('kj,jmab->kmab', weights, covariances) + noise


def observation_covariance(
    covariances: np.ndarray,
    book: PilotBook,
    pilot_powers: np.ndarray,
    noise_variance: float,
    user: int,
) -> np.ndarray:
    """
    Observation covariance of one user at one AP.

    D = sum_j mu_j C_j |t_j^H t_k|^2 + eta^2 I

    Args:
        covariances: K x L x L link covariances at the AP
        book: Pilot assignment
        pilot_powers: mu, K values in W
        noise_variance: eta^2 of the AP in W
        user: k
    """
    weights = np.abs(book.cross_correlation()[user]) ** 2 * np.asarray(pilot_powers, dtype=float)
    num_antennas = covariances.shape[-1]
    return np.einsum('j,jab->ab', weights, covariances) + noise_variance * np.eye(num_antennas)


def _check_conditioning(observation_cov: np.ndarray) -> None:
    condition = np.linalg.cond(observation_cov)
    if np.any(~np.isfinite(condition)) or np.any(condition > MAX_CONDITION_NUMBER):
        raise EstimationError(
            f"Observation covariance is ill-conditioned "
            f"(condition number {np.max(condition):.3e}); "
            f"zero noise with rank-deficient covariances?"
        )


def lmmse_estimate(
    observation: np.ndarray,
    covariance: np.ndarray,
    observation_cov: np.ndarray,
    pilot_power: float,
) -> np.ndarray:
    """
    LMMSE estimate sqrt(mu) C D^{-1} u of one link.

    Raises:
        EstimationError: If D has a condition number above MAX_CONDITION_NUMBER
    """
    _check_conditioning(observation_cov)
    return math.sqrt(pilot_power) * covariance @ solve(observation_cov, observation,
                                                      assume_a='her')


def estimate_channels(
    channels: ChannelSet,
    book: PilotBook,
    config: NetworkConfig,
    rng: np.random.Generator,
    pilot_powers: Optional[np.ndarray] = None,
) -> ChannelSet:
    """
    Run the pilot phase and estimate every link.

    Args:
        channels: True channels and covariances
        book: Pilot assignment
        config: Supplies pilot power and noise power
        rng: Generator for the pilot-phase noise
        pilot_powers: Optional per-user pilot powers (default config.pilot_power)

    Returns:
        Copy of channels carrying the estimates
    """
    num_users, num_aps, _ = channels.shape
    if pilot_powers is None:
        pilot_powers = np.full(num_users, config.pilot_power)
    noise_variances = np.full(num_aps, config.noise_power)

    observations = simulate_pilot_phase(channels, book, pilot_powers, noise_variances, rng)
    observation_cov = observation_covariances(
        channels.covariances, book, pilot_powers, noise_variances
    )
    _check_conditioning(observation_cov)

    whitened = np.linalg.solve(observation_cov, observations.observations[..., None])
    estimates = np.sqrt(pilot_powers)[:, None, None] * (channels.covariances @ whitened)[..., 0]
    logger.debug(f"Estimated {num_users}x{num_aps} links from {book.pilot_length} pilots")
    return channels.with_estimates(estimates)
