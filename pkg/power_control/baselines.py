"""Heuristic power-control baselines."""

import numpy as np

from config import BASELINES_RESPECT_EMF, FPC_EXPONENT
from models import ExposureLimits, Scenario


def _ul_caps(scenario: Scenario, limits: ExposureLimits, respect_emf: bool) -> np.ndarray:
    budgets = np.full(scenario.num_users, scenario.config.ul_power_budget)
    return limits.ul_power_caps(budgets) if respect_emf else budgets


def upc_dl(scenario: Scenario) -> np.ndarray:
    """Uniform split of each AP budget among its served users (K x M)."""
    association = scenario.association
    served = association.sum(axis=0)
    share = np.divide(
        scenario.config.dl_power_budget, served,
        out=np.zeros(served.shape), where=served > 0,
    )
    return association * share[None, :]


def ppc_dl(scenario: Scenario) -> np.ndarray:
    """Split of each AP budget proportional to the served users' large-scale gains."""
    weights = scenario.association * scenario.large_scale
    totals = weights.sum(axis=0)
    shares = np.divide(weights, totals[None, :], out=np.zeros(weights.shape),
                       where=totals[None, :] > 0)
    return scenario.config.dl_power_budget * shares


def upc_ul(scenario: Scenario, limits: ExposureLimits,
           respect_emf: bool = BASELINES_RESPECT_EMF) -> np.ndarray:
    """Every user at its budget (or at its SAR-limited cap with respect_emf)."""
    return _ul_caps(scenario, limits, respect_emf)


def fpc_ul(
    scenario: Scenario,
    limits: ExposureLimits,
    exponent: float = FPC_EXPONENT,
    respect_emf: bool = BASELINES_RESPECT_EMF,
) -> np.ndarray:
    """
    Fractional power control q_k = q_cap,k (a_ref / a_k)^nu.

    a_k is the aggregate large-scale gain of the user's serving APs. The
    reference is the weakest user for nu >= 0 (stronger users back off) and
    the strongest user for nu < 0, so no user exceeds its cap.

    Raises:
        ValueError: If nu lies outside [-1, 1]
    """
    if not -1.0 <= exponent <= 1.0:
        raise ValueError(f"FPC exponent must lie in [-1, 1], got {exponent}")

    aggregate = np.sum(scenario.association * scenario.large_scale, axis=1)
    reference = np.min(aggregate) if exponent >= 0 else np.max(aggregate)
    return _ul_caps(scenario, limits, respect_emf) * (reference / aggregate) ** exponent
