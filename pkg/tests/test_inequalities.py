import math

import numpy as np
import pytest

from bellbound.errors import BudgetExceeded, InvalidStrategy, UsageError
from bellbound.inequalities import (
    InequalityFactory,
    Strategy,
    classical_max_bruteforce,
    effective_operators,
    evaluate,
    per_block_values,
    restrict_blocks,
    reuse_for_dave,
    to_bell_operator,
)
from bellbound.loader.fixtures import load_fixture
from bellbound.quantum.core import Measurement
from bellbound.scenario import build_K_scenario

from tests.conftest import random_strategy


def correlator(strategy, scenario, a, b):
    ma = [scenario.embed(m, scenario.symbol(a)) for m in strategy.assignment[a].matrices]
    mb = [scenario.embed(m, scenario.symbol(b)) for m in strategy.assignment[b].matrices]
    o = (ma[0] - ma[1]) @ (mb[0] - mb[1])
    return float(np.real(np.trace(strategy.state @ o)))


def test_d2_block_is_chsh_over_sqrt2(chsh_scenario):
    f = InequalityFactory.create_functional(chsh_scenario)
    for seed in range(100):
        strategy = random_strategy(chsh_scenario, seed)
        e = lambda a, b: correlator(strategy, chsh_scenario, f"A{a}^A|B", f"B{b}^A|B")
        chsh = e(1, 1) + e(2, 1) + e(2, 2) - e(1, 2)
        assert abs(evaluate(f, strategy) - chsh / math.sqrt(2)) < 1e-9


def test_tsirelson_strategy_reaches_quantum_bound(chsh_scenario):
    s = 1 / math.sqrt(2)
    z = np.diag([1.0, -1.0])
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    dichotomic = lambda o: Measurement.from_matrices([(np.eye(2) + o) / 2, (np.eye(2) - o) / 2])
    assignment = {
        "A1^A|B": dichotomic(s * (z - x)),
        "A2^A|B": dichotomic(s * (z + x)),
        "B1^A|B": dichotomic(z),
        "B2^A|B": dichotomic(x),
    }
    phi = np.array([s, 0, 0, s])
    f = InequalityFactory.create_functional(chsh_scenario)
    assert abs(evaluate(f, Strategy.from_ket(phi, assignment)) - 2.0) < 1e-12


def test_classical_bounds_of_templates(j_functional, k_functional):
    assert abs(classical_max_bruteforce(j_functional) - 2 * math.sqrt(2)) < 1e-9
    assert abs(classical_max_bruteforce(k_functional) - 3 * math.sqrt(2)) < 1e-9


def test_bruteforce_cap(j_functional):
    with pytest.raises(BudgetExceeded):
        classical_max_bruteforce(j_functional, cap=10)


def test_weights_scale_blocks(j_scenario):
    f = InequalityFactory.create_functional(j_scenario, [2, 1])
    strategy = random_strategy(j_scenario, 4)
    plain = per_block_values(InequalityFactory.create_functional(j_scenario), strategy)
    weighted = per_block_values(f, strategy)
    assert abs(weighted["A|B"] - 2 * plain["A|B"]) < 1e-9
    assert abs(weighted["A|C"] - plain["A|C"]) < 1e-9
    assert abs(classical_max_bruteforce(f) - 3 * math.sqrt(2)) < 1e-9


def test_wrong_number_of_weights(j_scenario):
    with pytest.raises(UsageError):
        InequalityFactory.create_functional(j_scenario, [1, 1, 1])


def test_blocks_sum_to_value(k_functional, k_scenario):
    strategy = random_strategy(k_scenario, 11)
    blocks = per_block_values(k_functional, strategy)
    assert set(blocks) == {"A|B", "A|C", "A|BC"}
    assert abs(sum(blocks.values()) - evaluate(k_functional, strategy)) < 1e-9


def test_negative_sign_flips_last_block():
    plus = build_K_scenario(2, (2, 2, 2), 1)
    minus = build_K_scenario(2, (2, 2, 2), -1)
    strategy = random_strategy(plus, 2)
    f_plus = per_block_values(InequalityFactory.create_functional(plus), strategy)
    f_minus = per_block_values(InequalityFactory.create_functional(minus), strategy)
    assert abs(f_plus["A|BC"] + f_minus["A|BC"]) < 1e-9
    assert abs(f_plus["A|B"] - f_minus["A|B"]) < 1e-9


def test_bell_operator_matches_evaluate(k_functional, k_scenario):
    strategy = random_strategy(k_scenario, 6)
    g = to_bell_operator(k_functional, strategy.assignment)
    assert np.allclose(g, g.conj().T)
    value = np.real(np.trace(strategy.state @ g))
    assert abs(value - evaluate(k_functional, strategy)) < 1e-12


def test_effective_operators_reproduce_value(j_functional, j_scenario):
    strategy = random_strategy(j_scenario, 9)
    group = [s.name for s in j_scenario.symbols if s.party == "A"]
    weights, constant = effective_operators(j_functional, strategy.state, strategy.assignment, group)
    value = constant + sum(
        np.real(np.trace(e @ w))
        for name in group
        for e, w in zip(strategy.assignment[name].matrices, weights[name])
    )
    assert abs(value - evaluate(j_functional, strategy)) < 1e-9


def test_restrict_blocks(k_functional):
    j_part = restrict_blocks(k_functional, ["A|B", "A|C"])
    assert j_part.blocks == ["A|B", "A|C"]
    with pytest.raises(UsageError):
        restrict_blocks(k_functional, ["A|D"])


def test_missing_measurement(j_functional, j_scenario):
    strategy = random_strategy(j_scenario, 1)
    del strategy.assignment["C2^A|C"]
    with pytest.raises(InvalidStrategy):
        evaluate(j_functional, strategy)


def test_reuse_for_dave(fixtures_dir):
    fixture = load_fixture(str(fixtures_dir / "j2_dim2.json"))
    k_scenario = build_K_scenario(2, (2, 2, 2))
    lifted = reuse_for_dave(fixture.strategy, k_scenario, "A|B")
    k = InequalityFactory.create_functional(k_scenario)
    assert abs(evaluate(k, lifted) - (4 + math.sqrt(2))) < 1e-6
    blocks = per_block_values(k, lifted)
    assert abs(blocks["A|BC"] - blocks["A|B"]) < 1e-9
    with pytest.raises(UsageError):
        reuse_for_dave(fixture.strategy, k_scenario, "B|C")

