import functools

import pytest

from cbsa.properties import run_scenario
from cbsa.scenario import load_scenario, shipped


@functools.lru_cache(maxsize=None)
def _shipped_run(name):
    return run_scenario(load_scenario(shipped(name)))


@pytest.fixture(scope="session")
def es_scn():
    return load_scenario(shipped("paper_fig3"))


@pytest.fixture(scope="session")
def es_run():
    return _shipped_run("paper_fig3")


@pytest.fixture(scope="session")
def mc_scn():
    return load_scenario(shipped("mc_example"))
