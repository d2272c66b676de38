"""Network drops on a wrap-around square.

This module handles:
1. AP/BS placement (grid with jitter, or uniform)
2. User placement
3. Large-scale statistics of every user-AP link
4. User-centric association and the multi-cell counterpart of a deployment
"""

import math
from dataclasses import replace
from typing import Optional

import numpy as np

from channel import los_probability, path_loss, rician_factor
from config import MIN_PATHLOSS_DISTANCE_M
from logger import LogManager
from models import DeploymentMode, NetworkConfig, Scenario

logger = LogManager().get_logger("scenario")


def _check_in_square(points: np.ndarray, side: float) -> None:
    if np.any(points < 0) or np.any(points >= side):
        raise ValueError(f"Coordinates must lie in [0, {side})")


def _wrap(points: np.ndarray, side: float) -> np.ndarray:
    wrapped = np.mod(points, side)
    # fmod rounding can land exactly on the upper edge
    return np.where(wrapped >= side, 0.0, wrapped)


def torus_displacement(origins: np.ndarray, targets: np.ndarray, side: float) -> np.ndarray:
    """
    Shortest signed displacement from each origin to each target.

    Args:
        origins: A x 2 points
        targets: B x 2 points
        side: Side of the square in m

    Returns:
        A x B x 2 displacements with components in [-side/2, side/2)
    """
    delta = targets[None, :, :] - origins[:, None, :]
    return np.mod(delta + side / 2.0, side) - side / 2.0


def torus_distance(p, r, side: float) -> float:
    """
    Euclidean distance under the wrap-around convention.

    Args:
        p: First point (x, y)
        r: Second point (x, y)
        side: Side of the square in m

    Returns:
        Distance in m, at most side * sqrt(2) / 2

    Raises:
        ValueError: If a coordinate lies outside [0, side)
    """
    points = np.asarray([p, r], dtype=float)
    _check_in_square(points, side)
    displacement = torus_displacement(points[:1], points[1:], side)[0, 0]
    return float(np.hypot(displacement[0], displacement[1]))


def ap_layout(config: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """
    Place the APs (or BSs).

    The grid layout fills a ceil(sqrt(M)) column grid row by row and keeps the
    first M cell centres, each jittered uniformly by up to ap_jitter times the
    grid pitch per axis.

    Returns:
        M x 2 positions in [0, side)
    """
    side = config.area_side
    num_aps = config.num_aps

    if config.ap_layout == "random":
        return rng.uniform(0.0, side, size=(num_aps, 2))

    cols = math.ceil(math.sqrt(num_aps))
    rows = math.ceil(num_aps / cols)
    pitch = np.array([side / cols, side / rows])

    index = np.arange(num_aps)
    cells = np.stack([index % cols, index // cols], axis=1)
    centres = (cells + 0.5) * pitch
    jitter = rng.uniform(-config.ap_jitter, config.ap_jitter, size=(num_aps, 2)) * pitch
    return _wrap(centres + jitter, side)


def draw_user_positions(config: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """K x 2 user positions, i.i.d. uniform over the square."""
    return rng.uniform(0.0, config.area_side, size=(config.num_users, 2))


def associate_users(large_scale: np.ndarray, association_size: int) -> np.ndarray:
    """
    Activate the N strongest links of every user.

    Args:
        large_scale: K x M matrix of large-scale gains
        association_size: N, links per user

    Returns:
        K x M binary matrix; ties go to the lowest AP index

    Raises:
        ValueError: If N exceeds the number of APs
    """
    large_scale = np.asarray(large_scale, dtype=float)
    if not 1 <= association_size <= large_scale.shape[1]:
        raise ValueError(
            f"Cannot associate {association_size} of {large_scale.shape[1]} APs"
        )
    order = np.argsort(-large_scale, axis=1, kind="stable")
    association = np.zeros(large_scale.shape, dtype=int)
    np.put_along_axis(association, order[:, :association_size], 1, axis=1)
    return association


def generate_drop(
    config: NetworkConfig,
    seed,
    user_positions: Optional[np.ndarray] = None,
) -> Scenario:
    """
    Generate one network drop.

    Args:
        config: Network configuration
        seed: Anything accepted by numpy.random.default_rng
        user_positions: Optional K x 2 positions shared with another deployment

    Returns:
        Scenario; deterministic given (config, seed, user_positions)
    """
    rng = np.random.default_rng(seed)
    side = config.area_side

    ap_positions = ap_layout(config, rng)
    if user_positions is None:
        user_positions = draw_user_positions(config, rng)
    else:
        user_positions = np.asarray(user_positions, dtype=float)
        if user_positions.shape != (config.num_users, 2):
            raise ValueError(
                f"Expected {config.num_users} user positions, got {user_positions.shape}"
            )
        _check_in_square(user_positions, side)

    # AP-to-user displacement, K x M x 2
    displacement = -torus_displacement(user_positions, ap_positions, side)
    horizontal = np.hypot(displacement[..., 0], displacement[..., 1])
    distances = np.sqrt(horizontal ** 2 + (config.ap_height - config.user_height) ** 2)
    aoas = np.arctan2(displacement[..., 1], displacement[..., 0])

    p_los = los_probability(np.maximum(distances, MIN_PATHLOSS_DISTANCE_M))
    los_states = rng.random(distances.shape) < p_los
    large_scale = path_loss(distances, los_states, config.carrier_frequency)
    if config.shadowing_std_db > 0:
        shadowing_db = config.shadowing_std_db * rng.standard_normal(distances.shape)
        large_scale = large_scale * 10.0 ** (shadowing_db / 10.0)

    association = associate_users(large_scale, config.association_size)

    logger.debug(
        f"Generated {config.deployment_mode.value} drop: K={config.num_users}, "
        f"M={config.num_aps}, L={config.antennas_per_ap}, "
        f"LoS links={int(los_states.sum())}"
    )

    return Scenario(
        config=config,
        ap_positions=ap_positions,
        user_positions=user_positions,
        distances=distances,
        large_scale=large_scale,
        rician_factors=rician_factor(p_los),
        aoas=aoas,
        los_states=los_states,
        association=association,
    )


def to_multicell(config: NetworkConfig) -> NetworkConfig:
    """
    Map a cell-free deployment to its multi-cell counterpart.

    M single-site APs with L antennas become L sites with M antennas each; the
    per-site budget (M/L)P keeps the total deployed power, and each user is
    served by its strongest site.

    Raises:
        ValueError: If the configuration is already multi-cell
    """
    if config.deployment_mode is DeploymentMode.MULTI_CELL:
        raise ValueError("Configuration already describes a multi-cell deployment")

    return replace(
        config,
        num_aps=config.antennas_per_ap,
        antennas_per_ap=config.num_aps,
        association_size=1,
        dl_power_budget=config.num_aps / config.antennas_per_ap * config.dl_power_budget,
        deployment_mode=DeploymentMode.MULTI_CELL,
    )
