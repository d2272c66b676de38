"""Unit conversions used at the configuration boundary.

Everything inside the simulator is SI (W, m, Hz, bit/s); dB and dBm only
appear in configuration files and here.
"""

from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


def db_to_linear(value_db: ArrayLike) -> ArrayLike:
    """Convert a power ratio in dB to linear scale."""
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value: ArrayLike) -> ArrayLike:
    """Convert a linear power ratio to dB."""
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def dbm_to_watts(value_dbm: ArrayLike) -> ArrayLike:
    """Convert dBm to W (23 dBm -> 0.1995 W)."""
    return db_to_linear(value_dbm) * 1e-3


def watts_to_dbm(value_w: ArrayLike) -> ArrayLike:
    """Convert W to dBm."""
    return linear_to_db(np.asarray(value_w, dtype=float) * 1e3)
