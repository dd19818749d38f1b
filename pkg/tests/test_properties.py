import numpy as np
import pytest

from bellbound.bounds.moments import (
    RankClass,
    _realization,
    canonical_form,
    generate_monomials,
    sample_moment_matrix,
)
from bellbound.bounds.seesaw import run_restart, sweep_is_monotone
from bellbound.inequalities import evaluate, swap_strategy
from bellbound.loader.models import TOLERANCES, SeesawSettings, SolverSettings
from bellbound.quantum.core import ket_to_density, random_pure_state
from bellbound.scenario import build_K_scenario

from tests.conftest import random_strategy


def test_moment_matrices_are_valid(j_scenario):
    basis = generate_monomials(j_scenario, 2)
    rc = RankClass(merged=True)
    for seed in range(200):
        m = sample_moment_matrix(j_scenario, basis, rc, seed).matrix
        assert np.max(np.abs(m - m.conj().T)) <= 1e-10
        assert abs(m[0, 0] - 1) <= TOLERANCES.moment_normalization
        assert np.linalg.eigvalsh(m)[0] >= -TOLERANCES.moment_psd


def test_sweeps_are_monotone(j_functional):
    cfg = SeesawSettings(restarts=1, max_sweeps=100, patience=100, jobs=1)
    _, _, trace, _, note = run_restart(j_functional, cfg, SolverSettings(), 0)
    assert note is None
    assert len(trace) == 100
    assert sweep_is_monotone(trace)


def test_canonical_form_properties():
    scenario = build_K_scenario(2, (2, 2, 2))
    rng = np.random.default_rng(0)
    letters = len(scenario.symbols)
    for _ in range(1000):
        word = tuple(int(x) for x in rng.integers(0, letters, size=rng.integers(1, 6)))
        canonical = canonical_form(word, scenario)
        assert canonical_form(canonical, scenario) == canonical
        projectors = _realization(scenario, RankClass(merged=True), rng)
        rho = ket_to_density(random_pure_state(scenario.layout.total_dim, rng))
        product = lambda w: np.linalg.multi_dot([np.eye(8)] + [projectors[i] for i in w] + [np.eye(8)])
        assert abs(np.trace(rho @ product(word)) - np.trace(rho @ product(canonical))) < 1e-9


@pytest.mark.parametrize("seed", range(100))
def test_swap_invariance_of_j_and_k(seed, j_functional, j_scenario, k_functional, k_scenario):
    j_strategy = random_strategy(j_scenario, seed)
    swapped = swap_strategy(j_strategy, j_scenario)
    assert abs(evaluate(j_functional, j_strategy) - evaluate(j_functional, swapped)) < 1e-9
    k_strategy = random_strategy(k_scenario, seed)
    swapped = swap_strategy(k_strategy, k_scenario)
    assert abs(evaluate(k_functional, k_strategy) - evaluate(k_functional, swapped)) < 1e-9
