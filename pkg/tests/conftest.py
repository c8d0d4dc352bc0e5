"""Shared fixtures: the canned masking fixture and one Monte Carlo survey."""

import time

import pytest

from pulsecancel.bench import monte_carlo
from pulsecancel.preprocess import slow_time_phase
from pulsecancel.scenario import fig_masking_scenario, scenario_slow_time


@pytest.fixture(scope="session")
def fixture_scenario():
    return fig_masking_scenario()


@pytest.fixture(scope="session")
def fixture_phase(fixture_scenario):
    z = scenario_slow_time(fixture_scenario)
    return slow_time_phase(z, fixture_scenario.radar.frame_rate_hz)


@pytest.fixture(scope="session")
def mc_survey():
    """Three-method survey over both masking families.

    Session-scoped so the 280 s records are synthesized once and shared by
    every ordering check that consumes them.
    """
    t0 = time.perf_counter()
    reports = {
        family: monte_carlo(family, range(10), cpis=(15.0, 20.0, 30.0),
                            methods=("conventional", "eca", "ahet"))
        for family in ("masking-b", "masking-c")
    }
    reports["elapsed_s"] = time.perf_counter() - t0
    return reports
