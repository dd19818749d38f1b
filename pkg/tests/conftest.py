from pathlib import Path

import numpy as np
import pytest

from bellbound.bounds.seesaw import random_assignment
from bellbound.inequalities import InequalityFactory, Strategy
from bellbound.quantum.core import random_pure_state
from bellbound.scenario import build_J_scenario, build_K_scenario, build_satwap_scenario


FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def random_strategy(scenario, seed) -> Strategy:
    rng = np.random.default_rng(seed)
    assignment = random_assignment(scenario, rng)
    return Strategy.from_ket(random_pure_state(scenario.layout.total_dim, rng), assignment)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def chsh_scenario():
    return build_satwap_scenario(2, 2)


@pytest.fixture
def j_scenario():
    return build_J_scenario(2, (2, 2, 2))


@pytest.fixture
def k_scenario():
    return build_K_scenario(2, (2, 2, 2))


@pytest.fixture
def j_functional(j_scenario):
    return InequalityFactory.create_functional(j_scenario)


@pytest.fixture
def k_functional(k_scenario):
    return InequalityFactory.create_functional(k_scenario)
