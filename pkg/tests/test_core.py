import numpy as np
import pytest

from bellbound.errors import InvalidStrategy, RankOutOfRange
from bellbound.loader.models import EffectKind
from bellbound.quantum.core import (
    Effect,
    Measurement,
    haar_projector,
    haar_unitary,
    ket_to_density,
    nearest_measurement,
    partial_trace,
    random_povm,
    random_pure_state,
    round_to_projective,
    tensor,
    top_eigenpair,
)


def test_haar_unitary_is_unitary():
    u = haar_unitary(4, seed=3)
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def test_same_seed_same_sample():
    assert np.allclose(random_pure_state(5, seed=7), random_pure_state(5, seed=7))
    assert not np.allclose(random_pure_state(5, seed=7), random_pure_state(5, seed=8))


@pytest.mark.parametrize("rank", [0, 1, 2, 3])
def test_haar_projector_rank(rank):
    effect = haar_projector(3, rank, seed=rank)
    effect.validate()
    assert np.isclose(np.trace(effect.matrix).real, rank)


def test_haar_projector_rank_out_of_range():
    with pytest.raises(RankOutOfRange):
        haar_projector(2, 3)


def test_random_povm_is_valid():
    povm = random_povm(3, 4, seed=1)
    povm.validate()
    assert povm.outcomes == 4


def test_measurement_completed_adds_last_effect():
    z0 = np.diag([1.0, 0.0])
    measurement = Measurement.completed([z0])
    measurement.validate()
    assert np.allclose(measurement.matrices[1], np.diag([0.0, 1.0]))


def test_invalid_effect_rejected():
    with pytest.raises(InvalidStrategy):
        Effect(np.diag([1.2, -0.2]).astype(complex)).validate()
    with pytest.raises(InvalidStrategy):
        Measurement.from_matrices([np.eye(2), np.eye(2)]).validate()


def test_nearest_measurement_repairs_rounding():
    rounded = [np.array([[0.5001, 0.5], [0.5, 0.5]]), np.array([[0.5, -0.5], [-0.5, 0.5]])]
    repaired = nearest_measurement(rounded)
    repaired.validate()
    assert max(np.linalg.norm(r - m) for r, m in zip(repaired.matrices, rounded)) < 1e-3


def test_round_to_projective():
    povm = random_povm(4, 2, seed=5)
    projective = round_to_projective(povm)
    projective.validate()
    assert all(e.kind == EffectKind.projector for e in projective.effects)


def test_top_eigenpair():
    value, vector = top_eigenpair(np.diag([1.0, 5.0, 2.0]))
    assert np.isclose(value, 5.0)
    assert np.isclose(abs(vector[1]), 1.0)


def test_top_eigenpair_of_degenerate_operators():
    for m in (np.eye(4), np.diag([3.0, 3.0, 1.0]), np.zeros((2, 2))):
        value, vector = top_eigenpair(m)
        assert np.isclose(value, np.max(np.diag(m)))
        assert vector.shape == (m.shape[0],)
        assert np.isclose(np.linalg.norm(vector), 1.0)
        assert np.isclose(np.real(vector.conj() @ m @ vector), value)


def test_top_eigenpair_rejects_nan():
    with pytest.raises(InvalidStrategy):
        top_eigenpair(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_partial_trace_of_product_state():
    a = ket_to_density(random_pure_state(2, seed=0))
    b = ket_to_density(random_pure_state(3, seed=1))
    c = ket_to_density(random_pure_state(2, seed=2))
    rho = tensor(a, b, c)
    assert np.allclose(partial_trace(rho, (2, 3, 2), [1]), b)
    assert np.allclose(partial_trace(rho, (2, 3, 2), [0, 2]), tensor(a, c))
