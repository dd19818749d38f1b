import json
import math

import pytest

from bellbound.bounds import BoundFactory
from bellbound.errors import InvalidStrategy, UsageError
from bellbound.inequalities import evaluate, per_block_values, quantum_bound
from bellbound.loader.fixtures import load_fixture, to_complex
from bellbound.loader.models import BoundJob


EXACT = {
    "j2_dim2": (2 + math.sqrt(2), {"A|B": 2.0, "A|C": math.sqrt(2)}),
    "k2_dim2": (4 + math.sqrt(2), {"A|B": 2.0, "A|C": math.sqrt(2), "A|BC": 2.0}),
    "j2_dim4": (4.0, {"A|B": 2.0, "A|C": 2.0}),
    "k2_dim4": (6.0, {"A|B": 2.0, "A|C": 2.0, "A|BC": 2.0}),
}


@pytest.mark.parametrize("name", sorted(EXACT))
def test_exact_fixtures(name, fixtures_dir):
    fixture = load_fixture(str(fixtures_dir / f"{name}.json"))
    value, blocks = EXACT[name]
    assert fixture.name == name
    assert abs(evaluate(fixture.functional, fixture.strategy) - value) < 1e-6
    computed = per_block_values(fixture.functional, fixture.strategy)
    for block, expected in blocks.items():
        assert abs(computed[block] - expected) < 1e-6
    assert fixture.max_repair < 1e-9


QUTRIT_PUBLISHED = {
    "j2_dim3": (3.6365, [1.8183, 1.8183]),
    "k2_dim3": (5.5096, [1.6837, 1.9130, 1.9130]),
}


@pytest.mark.parametrize("name", sorted(QUTRIT_PUBLISHED))
def test_qutrit_fixtures_match_published_values(name, fixtures_dir):
    fixture = load_fixture(str(fixtures_dir / f"{name}.json"))
    value, blocks = QUTRIT_PUBLISHED[name]
    assert fixture.scenario.layout.dims == (3, 2, 2)
    assert fixture.max_repair <= 5e-2
    assert abs(evaluate(fixture.functional, fixture.strategy) - value) < 5e-3
    computed = sorted(per_block_values(fixture.functional, fixture.strategy).values())
    assert computed == pytest.approx(blocks, abs=1e-2)


def test_j2_dim3_state_is_rebuilt(fixtures_dir):
    fixture = load_fixture(str(fixtures_dir / "j2_dim3.json"))
    assert fixture.state_source == "reconstructed"
    # The printed ket does not belong to the printed measurements.
    assert fixture.printed_value is not None
    assert fixture.printed_value < 2.0
    value = evaluate(fixture.functional, fixture.strategy)
    assert value <= 2 * quantum_bound(2, 2) + 1e-6
    assert load_fixture(str(fixtures_dir / "k2_dim3.json")).state_source == "printed"


def test_unknown_reconstruction(tmp_path, fixtures_dir):
    payload = json.loads((fixtures_dir / "j2_dim3.json").read_text())
    payload["state"]["reconstruct"] = "average"
    with pytest.raises(UsageError):
        load_fixture(write(tmp_path, payload))


def test_to_complex_pairs():
    array = to_complex([[[1.0, 0.0], [0.0, 1.0]], [[0.0, -1.0], [2.0, 0.0]]], 2)
    assert array.shape == (2, 2)
    assert array[0, 1] == 1j
    assert to_complex([[1.0, 0.0], [0.0, 1.0]], 2)[1, 1] == 1


def write(tmp_path, payload) -> str:
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps(payload))
    return str(path)


def test_bad_ket_length(tmp_path, fixtures_dir):
    payload = json.loads((fixtures_dir / "j2_dim2.json").read_text())
    payload["state"]["ket"] = payload["state"]["ket"][:4]
    with pytest.raises(InvalidStrategy):
        load_fixture(write(tmp_path, payload))


def test_missing_measurement(tmp_path, fixtures_dir):
    payload = json.loads((fixtures_dir / "j2_dim2.json").read_text())
    del payload["measurements"]["C1^A|C"]
    with pytest.raises(InvalidStrategy):
        load_fixture(write(tmp_path, payload))


def test_effect_too_far_from_valid(tmp_path, fixtures_dir):
    payload = json.loads((fixtures_dir / "j2_dim2.json").read_text())
    payload["measurements"]["B1^A|B"] = [[[[2.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]]
    with pytest.raises(InvalidStrategy):
        load_fixture(write(tmp_path, payload))


def test_missing_state(tmp_path, fixtures_dir):
    payload = json.loads((fixtures_dir / "j2_dim2.json").read_text())
    payload["state"] = {}
    with pytest.raises(UsageError):
        load_fixture(write(tmp_path, payload))


def test_fixture_bound_record(fixtures_dir):
    job = BoundJob(name="j2", method="evaluate", fixture=str(fixtures_dir / "j2_dim2.json"))
    record = BoundFactory.create_bound("run", job).run()[0]
    assert abs(record.value - (2 + math.sqrt(2))) < 1e-6
    assert record.extras["fixture"] == "j2_dim2"
    assert record.scenario.dims == (2, 2, 2)


def test_fixture_bound_lifted_to_k(fixtures_dir):
    job = BoundJob(
        name="k2",
        method="evaluate",
        fixture=str(fixtures_dir / "j2_dim2.json"),
        reuse_for_dave="A|B",
    )
    record = BoundFactory.create_bound("run", job).run()[0]
    assert record.scenario.inequality == "K"
    assert abs(record.value - (4 + math.sqrt(2))) < 1e-6


def test_fixture_path_required():
    with pytest.raises(UsageError):
        BoundFactory.create_bound("run", BoundJob(name="x", method="evaluate"))
