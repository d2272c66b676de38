import numpy as np
import pytest

from models import ExposureLimits
from power_control import fpc_ul, ppc_dl, upc_dl, upc_ul


@pytest.fixture
def limits(small_scenario):
    return ExposureLimits.uniform(small_scenario.num_users)


def aggregate_gains(scenario):
    return np.sum(scenario.association * scenario.large_scale, axis=1)


class TestDownlink:
    def test_uniform_split(self, small_scenario):
        powers = upc_dl(small_scenario)
        budget = small_scenario.config.dl_power_budget
        served = small_scenario.association.sum(axis=0)

        for ap in range(small_scenario.num_aps):
            users = small_scenario.served_users(ap)
            if users.size:
                assert powers[users, ap] == pytest.approx(np.full(users.size, budget / served[ap]))
                assert powers[:, ap].sum() == pytest.approx(budget)
            else:
                assert np.all(powers[:, ap] == 0)
        assert np.all(powers[small_scenario.association == 0] == 0)

    def test_proportional_split(self, small_scenario):
        powers = ppc_dl(small_scenario)
        budget = small_scenario.config.dl_power_budget

        for ap in range(small_scenario.num_aps):
            users = small_scenario.served_users(ap)
            if users.size:
                weights = small_scenario.large_scale[users, ap]
                assert powers[users, ap] == pytest.approx(budget * weights / weights.sum())
        assert np.all(powers[small_scenario.association == 0] == 0)

    def test_proportional_favours_the_stronger_user(self, small_scenario):
        powers = ppc_dl(small_scenario)
        for ap in range(small_scenario.num_aps):
            users = small_scenario.served_users(ap)
            if users.size >= 2:
                order = np.argsort(small_scenario.large_scale[users, ap])
                assert np.all(np.diff(powers[users, ap][order]) >= 0)


class TestUplink:
    def test_uniform_uses_the_budget(self, small_scenario, limits):
        powers = upc_ul(small_scenario, limits, respect_emf=False)
        assert powers == pytest.approx(np.full(4, small_scenario.config.ul_power_budget))

    def test_uniform_respecting_sar(self, small_scenario, limits):
        # 0.08 W/kg / 8 per kg
        powers = upc_ul(small_scenario, limits, respect_emf=True)
        assert powers == pytest.approx(np.full(4, 0.01))

    def test_fpc_without_exponent_is_uniform(self, small_scenario, limits):
        powers = fpc_ul(small_scenario, limits, exponent=0.0, respect_emf=False)
        assert powers == pytest.approx(np.full(4, small_scenario.config.ul_power_budget))

    def test_full_inversion_equalises_received_power(self, small_scenario, limits):
        powers = fpc_ul(small_scenario, limits, exponent=1.0, respect_emf=False)
        received = powers * aggregate_gains(small_scenario)
        assert received == pytest.approx(np.full(4, received[0]))
        weakest = np.argmin(aggregate_gains(small_scenario))
        assert powers[weakest] == pytest.approx(small_scenario.config.ul_power_budget)
        assert np.all(powers <= small_scenario.config.ul_power_budget * (1 + 1e-12))

    def test_negative_exponent_references_the_strongest_user(self, small_scenario, limits):
        powers = fpc_ul(small_scenario, limits, exponent=-1.0, respect_emf=True)
        strongest = np.argmax(aggregate_gains(small_scenario))
        assert powers[strongest] == pytest.approx(0.01)
        assert np.all(powers <= 0.01 * (1 + 1e-12))

    def test_fpc_respects_sar(self, small_scenario, limits):
        powers = fpc_ul(small_scenario, limits, exponent=0.5, respect_emf=True)
        assert np.all(powers * 8.0 <= 0.08 * (1 + 1e-12))

    @pytest.mark.parametrize("exponent", [2.0, -1.5])
    def test_exponent_out_of_range(self, small_scenario, limits, exponent):
        with pytest.raises(ValueError):
            fpc_ul(small_scenario, limits, exponent=exponent)
