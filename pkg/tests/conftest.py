import os

import pytest

from contractclear import AgentParams, ContractParams, Population, scenario_from_dict

DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: acceptance-scale runs')


@pytest.fixture
def two_agents():
    return [AgentParams(10.0, 1.0, 0), AgentParams(10.0, 1.0, 1)]


@pytest.fixture
def two_agent_pop(two_agents):
    return Population.from_agents(two_agents)


@pytest.fixture
def canonical():
    """The symmetric two-agent instance clearing at mu* = 1 with x = (4, 4)."""
    return ContractParams(8.0, 0.0, 0.0)


@pytest.fixture
def default_scenario():
    return scenario_from_dict({})


@pytest.fixture
def small_scenario():
    # the default model at a size the unit tests can afford
    return scenario_from_dict({
        'experiment': {'replications': 4, 'sweep_replications': 4, 'master_seed': 7},
    })


@pytest.fixture
def ratings_path():
    return os.path.join(DATA_DIR, 'u.data')
