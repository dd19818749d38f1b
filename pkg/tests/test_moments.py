import math

import numpy as np
import pytest

from bellbound.bounds.moments import (
    GramSchmidt,
    RankClass,
    basis_settings,
    build_basis,
    canonical_form,
    common_range,
    deterministic_cap,
    enumerate_rank_classes,
    generate_monomials,
    objective_matrix,
    swap_permutation,
    symmetrize,
    upper_bound,
)
from bellbound.errors import (
    AsymmetricScenario,
    BudgetExceeded,
    ObjectiveNotRepresentable,
    RankOutOfRange,
    UnsupportedOutcomes,
    UsageError,
)
from bellbound.inequalities import InequalityFactory, Strategy, evaluate
from bellbound.loader.models import MomentSettings, RankMode
from bellbound.quantum.core import round_to_projective
from bellbound.runner.table1 import table_moment_settings
from bellbound.scenario import build_J_scenario
from bellbound.stores import DuckDBStore

from tests.conftest import random_strategy


def test_commuting_letters_are_sorted(j_scenario):
    a1_ab, b1 = j_scenario.names.index("A1^A|B"), j_scenario.names.index("B1^A|B")
    assert canonical_form((b1, a1_ab), j_scenario) == (a1_ab, b1)


def test_non_commuting_letters_keep_order(j_scenario):
    a1_ab, a1_ac = j_scenario.names.index("A1^A|B"), j_scenario.names.index("A1^A|C")
    assert canonical_form((a1_ac, a1_ab), j_scenario) == (a1_ac, a1_ab)


def test_projector_words_collapse(j_scenario):
    a, b = j_scenario.names.index("A1^A|B"), j_scenario.names.index("B1^A|B")
    assert canonical_form((a, a), j_scenario) == (a,)
    assert canonical_form((a, b, a), j_scenario) == (a, b)


def test_monomials_of_degree_one(j_scenario):
    basis = generate_monomials(j_scenario, 1)
    assert basis.words[0] == ()
    assert len(basis.words) == 1 + len(j_scenario.symbols)


def test_monomials_are_canonical(j_scenario):
    basis = generate_monomials(j_scenario, 2)
    assert len(set(basis.words)) == len(basis.words)
    assert all(canonical_form(w, j_scenario) == w for w in basis.words)


def test_rank_classes(j_scenario):
    assert enumerate_rank_classes(j_scenario, RankMode.merged) == [RankClass(merged=True)]
    every = enumerate_rank_classes(j_scenario, RankMode.all, symmetric=False)
    assert len(every) == 3 ** 8
    reduced = enumerate_rank_classes(j_scenario, RankMode.all, symmetric=True)
    assert len(every) / 2 <= len(reduced) < len(every)
    pruned = enumerate_rank_classes(
        j_scenario, RankMode.pruned, {s.name: [1] for s in j_scenario.symbols}
    )
    assert pruned == [RankClass(ranks=(1,) * 8)]


def test_rank_restrictions_out_of_range(j_scenario):
    with pytest.raises(RankOutOfRange):
        enumerate_rank_classes(j_scenario, RankMode.pruned, {"B1^A|B": [3]})
    with pytest.raises(RankOutOfRange):
        RankClass(ranks=(1, 2)).validate_for(j_scenario)


def test_more_than_two_outcomes():
    with pytest.raises(UnsupportedOutcomes):
        enumerate_rank_classes(build_J_scenario(3, (3, 3, 3)))


def test_objective_matrix_matches_strategy(chsh_scenario):
    f = InequalityFactory.create_functional(chsh_scenario)
    basis = generate_monomials(chsh_scenario, 1)
    w = objective_matrix(f, basis)
    assert np.allclose(w, w.T)
    strategy = random_strategy(chsh_scenario, 3)
    # Words use the first effect as a projector.
    projective = Strategy(
        strategy.state,
        {k: round_to_projective(v) for k, v in strategy.assignment.items()},
    )
    ops = [
        chsh_scenario.embed(projective.assignment[name].matrices[0], chsh_scenario.symbol(name))
        for name in chsh_scenario.names
    ]
    columns = [np.eye(4)] + [ops[word[0]] for word in basis.words[1:]]
    m = np.array([[np.trace(projective.state @ p.conj().T @ q) for q in columns] for p in columns])
    assert abs(np.sum(w * m).real - evaluate(f, projective)) < 1e-9


def test_objective_needs_degree(j_functional, j_scenario):
    with pytest.raises(ObjectiveNotRepresentable):
        objective_matrix(j_functional, generate_monomials(j_scenario, 0))


def test_gram_schmidt_rejects_spanned_vectors():
    gs = GramSchmidt(3)
    assert gs.append(np.array([1.0, 0, 0]))
    assert gs.append(np.array([1.0, 1.0, 0]))
    assert not gs.append(np.array([3.0, -2.0, 0]))
    assert not gs.append(np.zeros(3))
    assert np.allclose(gs.V @ gs.V.T, np.eye(2))


def test_basis_stabilizes(chsh_scenario):
    basis = generate_monomials(chsh_scenario, 1)
    moment_basis = build_basis(chsh_scenario, basis, RankClass(merged=True), stabilization=10, seed=0)
    assert moment_basis.stabilization_counter == 10
    assert 0 < moment_basis.rank <= 2 * len(basis.words) ** 2
    assert np.allclose(moment_basis.vectors @ moment_basis.vectors.T, np.eye(moment_basis.rank), atol=1e-8)


def test_basis_budget(chsh_scenario):
    basis = generate_monomials(chsh_scenario, 2)
    with pytest.raises(BudgetExceeded):
        build_basis(chsh_scenario, basis, RankClass(merged=True), stabilization=25, seed=0, max_samples=5)


def test_symmetrized_basis_is_invariant(j_scenario):
    basis = generate_monomials(j_scenario, 1)
    permutation = swap_permutation(j_scenario, basis)
    assert sorted(permutation) == list(range(len(basis.words)))
    moment_basis = build_basis(
        j_scenario, basis, RankClass(merged=True), stabilization=10, seed=1, permutation=permutation
    )
    for m in moment_basis.matrices():
        assert np.allclose(symmetrize(m, permutation), m, atol=1e-9)
    again = symmetrize(moment_basis, permutation)
    assert again.rank == moment_basis.rank


def test_asymmetric_functional_rejected(j_scenario):
    f = InequalityFactory.create_functional(j_scenario, [2, 1])
    with pytest.raises(AsymmetricScenario):
        upper_bound(j_scenario, f, MomentSettings(degree=1, jobs=1))


def test_chsh_upper_bound(chsh_scenario):
    f = InequalityFactory.create_functional(chsh_scenario)
    report = upper_bound(chsh_scenario, f, MomentSettings(degree=2, symmetrize=False, jobs=1))
    assert report.complete
    assert report.argmax_class == "merged"
    assert abs(report.value - 2.0) < 1e-3


def test_basis_cache_is_reused(chsh_scenario, tmp_path):
    f = InequalityFactory.create_functional(chsh_scenario)
    store = DuckDBStore(str(tmp_path / "cache.db"))
    cfg = MomentSettings(degree=1, symmetrize=False, jobs=1)
    first = upper_bound(chsh_scenario, f, cfg, store=store)
    cached = store.load_basis(chsh_scenario.digest(), "merged", basis_settings(cfg))
    assert cached is not None
    assert cached.shape[0] == first.basis_ranks["merged"]
    second = upper_bound(chsh_scenario, f, cfg, store=store)
    assert abs(first.value - second.value) < 1e-6




def test_sampling_settings_key_the_cache(chsh_scenario, tmp_path):
    f = InequalityFactory.create_functional(chsh_scenario)
    store = DuckDBStore(str(tmp_path / "cache.db"))
    cfg = MomentSettings(degree=1, symmetrize=False, jobs=1)
    upper_bound(chsh_scenario, f, cfg, store=store)
    digest = chsh_scenario.digest()
    assert store.load_basis(digest, "merged", basis_settings(cfg)) is not None
    for change in ({"seed": 1}, {"stabilization": 10}, {"residual_tol": 1e-9}, {"extra_words": ["AB"]}):
        assert store.load_basis(digest, "merged", basis_settings(cfg.model_copy(update=change))) is None


def test_party_patterns_extend_the_basis(j_scenario):
    plain = generate_monomials(j_scenario, 2)
    extended = generate_monomials(j_scenario, 2, ["abc", "AAA", "AAA"])
    assert extended.patterns == ("AAA", "ABC")
    assert set(plain.words) < set(extended.words)
    names = j_scenario.names
    a_ab, a_ac = names.index("A1^A|B"), names.index("A1^A|C")
    assert (a_ab, a_ac, a_ab) in extended.words
    b, c = names.index("B1^A|B"), names.index("C1^A|C")
    assert canonical_form((a_ab, b, c), j_scenario) in extended.words
    assert all(canonical_form(w, j_scenario) == w for w in extended.words)


def test_unknown_party_pattern(j_scenario):
    with pytest.raises(UsageError):
        generate_monomials(j_scenario, 1, ["AD"])


def test_interior_rank_classes():
    qubits = build_J_scenario(2, (2, 2, 2))
    assert enumerate_rank_classes(qubits, RankMode.all, interior=True) == [RankClass(ranks=(1,) * 8)]
    qutrit = build_J_scenario(2, (3, 2, 2))
    every = enumerate_rank_classes(qutrit, RankMode.all, symmetric=False, interior=True)
    assert len(every) == 16
    assert all(0 < r < 3 for rc in every for r in rc.ranks[:4])
    assert len(enumerate_rank_classes(qutrit, RankMode.all, interior=True)) == 10
    with pytest.raises(UsageError):
        enumerate_rank_classes(qutrit, RankMode.merged, interior=True)


def test_deterministic_cap(j_scenario, j_functional):
    assert abs(deterministic_cap(j_functional) - (2 + math.sqrt(2))) < 1e-9
    weighted = InequalityFactory.create_functional(j_scenario, [2, 1])
    assert abs(deterministic_cap(weighted) - (4 + math.sqrt(2))) < 1e-9


def test_common_range_drops_shared_kernel():
    rng = np.random.default_rng(0)
    kernel = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
    project = np.eye(3) - np.outer(kernel, kernel)
    matrices = []
    for _ in range(3):
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        matrices.append(project @ (g @ g.conj().T) @ project)
    face = common_range(matrices)
    assert face.shape == (3, 2)
    assert np.allclose(face.conj().T @ kernel, 0, atol=1e-9)


def test_default_qubit_j_relaxation_returns_a_value(j_scenario, j_functional):
    report = upper_bound(j_scenario, j_functional, MomentSettings(jobs=1))
    assert report.value is not None
    assert report.complete
    assert 2 + math.sqrt(2) - 1e-4 <= report.value <= 4 + 1e-3
    assert report.backends["merged"] in ("clarabel", "scs")
    assert report.face_dims["merged"] <= len(generate_monomials(j_scenario, 2).words)


@pytest.mark.slow
@pytest.mark.parametrize("dims, expected", [((2, 2, 2), 2 + math.sqrt(2)), ((3, 2, 2), 3.6365)])
def test_j_upper_bound_per_rank_class(dims, expected):
    scenario = build_J_scenario(2, dims)
    f = InequalityFactory.create_functional(scenario)
    report = upper_bound(scenario, f, table_moment_settings(jobs=1))
    assert report.complete
    assert report.deterministic_cap == pytest.approx(2 + math.sqrt(2))
    assert abs(report.value - expected) < 1e-2
