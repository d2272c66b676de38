"""Shared fixtures: small deployments, seeded generators, scratch directories."""

import os
import tempfile

# Keep logs and checkpoints of the test run out of the user's home directory
os.environ.setdefault("CELLFREE_EMF_HOME", tempfile.mkdtemp(prefix="cellfree_emf_tests_"))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from channel import draw_channel_set  # noqa: E402
from estimation import assign_pilots, estimate_channels  # noqa: E402
from models import CampaignSpec, NetworkConfig, SchemeId  # noqa: E402
from scenario import generate_drop  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def small_config():
    return NetworkConfig(
        num_users=4,
        num_aps=8,
        antennas_per_ap=2,
        association_size=3,
        area_side=300.0,
    )


@pytest.fixture
def small_scenario(small_config):
    return generate_drop(small_config, seed=11)


@pytest.fixture
def estimated_channels(small_scenario):
    config = small_scenario.config
    channels = draw_channel_set(small_scenario, np.random.default_rng(1))
    book = assign_pilots(
        config.num_users, config.pilot_length, small_scenario.user_positions,
        side=config.area_side,
    )
    return estimate_channels(channels, book, config, np.random.default_rng(2))


@pytest.fixture
def tiny_spec():
    """One drop, two users, uniform power control only."""
    return CampaignSpec(
        base=NetworkConfig(
            num_users=2, num_aps=4, antennas_per_ap=2, association_size=2, area_side=200.0,
        ),
        schemes=[SchemeId.UPC],
        num_drops=1,
        master_seed=5,
    )
