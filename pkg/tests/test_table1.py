import math

import pytest

from bellbound.errors import ConfigError, SolverFailure
from bellbound.loader.models import SeesawSettings
from bellbound.runner import table1
from bellbound.runner.table1 import (
    PUBLISHED,
    reference_values,
    reproduce_table1,
    select_rows,
    table_moment_settings,
)


def test_reference_columns():
    j = reference_values("J")
    k = reference_values("K")
    assert abs(j["c+q"] - (2 + math.sqrt(2))) < 1e-12
    assert abs(j["q+q"] - 4) < 1e-12
    assert abs(k["c+q"] - (4 + math.sqrt(2))) < 1e-12
    assert abs(k["q+q"] - 6) < 1e-12


def test_row_selection():
    assert select_rows(None) == list(PUBLISHED)
    assert select_rows(["J2"]) == [("J", 2), ("J", 3), ("J", 4)]
    assert select_rows(["k2:3", "J2:2"]) == [("K", 3), ("J", 2)]


@pytest.mark.parametrize("row", ["J2:5", "L2", "J2:x", "K3"])
def test_unknown_rows_are_rejected(row):
    with pytest.raises(ConfigError):
        select_rows([row])


def test_zero_budget_skips_rows():
    rows = reproduce_table1("run", rows=["J2:2"], budget_minutes=1e-9)
    assert len(rows) == 1
    assert not rows[0].complete
    assert rows[0].lb is None


def test_rows_get_the_remaining_budget(monkeypatch):
    jobs = []

    def stop(job, *args):
        jobs.append(job)
        raise SolverFailure("stopped")

    monkeypatch.setattr(table1, "_run", stop)
    rows = reproduce_table1("run", rows=["J2:2", "K2:2"], budget_minutes=5)
    assert [job.seesaw.time_budget is not None for job in jobs] == [True, True]
    assert all(0 < job.seesaw.time_budget <= 300 for job in jobs)
    assert jobs[1].seesaw.time_budget <= jobs[0].seesaw.time_budget
    assert all(not row.complete for row in rows)
    reproduce_table1("run", rows=["J2:2"])
    assert jobs[-1].seesaw.time_budget is None


def test_table_moment_defaults():
    cfg = table_moment_settings(jobs=1, degree=None)
    assert cfg.extra_words == ["AAA"]
    assert cfg.cap_deterministic
    assert cfg.rank_mode == "all"
    assert cfg.degree == 2


@pytest.mark.slow
def test_qubit_rows():
    rows = reproduce_table1(
        "run",
        rows=["J2:2", "K2:2"],
        seesaw=SeesawSettings(restarts=20, seed=0, jobs=1),
        moment=table_moment_settings(jobs=1),
    )
    j, k = rows
    assert j.lb_pass and j.ub_pass
    assert k.lb_pass and k.ub_pass
    # Sandwich: classical <= lb <= ub.
    assert j.lb <= j.ub + 1e-4
    assert k.lb <= k.ub + 1e-4


@pytest.mark.slow
def test_qutrit_lower_bound_rows():
    rows = reproduce_table1(
        "run",
        rows=["J2:3", "K2:3"],
        seesaw=SeesawSettings(restarts=20, seed=0, jobs=1),
        moment=table_moment_settings(jobs=1),
    )
    j, k = rows
    assert j.lb_pass
    assert k.lb_pass
    assert abs(j.lb_blocks["A|B"] - j.lb_blocks["A|C"]) <= 2e-2
