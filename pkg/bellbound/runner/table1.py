"""Lower and upper bounds on J_2 and K_2 for a qubit Bob and Charlie.

Published values are comparison constants only; nothing is optimized towards them.
"""

import math
import time

from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel
from rich.console import Console
from rich.progress import Progress
from rich.table import Table

from bellbound.bounds import BoundFactory
from bellbound.errors import BellboundError, ConfigError
from bellbound.inequalities import classical_bound_formula, quantum_bound
from bellbound.loader.models import (
    BoundJob,
    Method,
    MomentSettings,
    RunRecord,
    SeesawSettings,
    SolverSettings,
)
from bellbound.stores import DuckDBStore


console = Console()

LB_TOL = 1e-3
UB_TOL = 1e-2

# (inequality, d_A) -> (lower bound, upper bound) as published, Bob and Charlie qubits.
PUBLISHED = {
    ("J", 2): (3.4142, 3.4142),
    ("J", 3): (3.6365, 3.6365),
    ("J", 4): (4.0000, 4.0000),
    ("K", 2): (5.4142, 5.4142),
    ("K", 3): (5.5096, 5.6365),
    ("K", 4): (6.0000, 6.0000),
}

ROW_ORDER = [("J", 2), ("J", 3), ("J", 4), ("K", 2), ("K", 3), ("K", 4)]

# Per-class relaxation with Alice-only words of length three; classes with a
# deterministic projector are capped analytically.
TABLE_MOMENT = {"rank_mode": "all", "extra_words": ["AAA"], "cap_deterministic": True}


def table_moment_settings(**overrides) -> MomentSettings:
    values = {**TABLE_MOMENT, **{k: v for k, v in overrides.items() if v is not None}}
    return MomentSettings(**values)


class TableRow(BaseModel):
    inequality: str
    dims: List[int]
    lb: Optional[float] = None
    ub: Optional[float] = None
    published_lb: float
    published_ub: float
    classical_plus_quantum: float
    quantum_plus_quantum: float
    lb_pass: Optional[bool] = None
    ub_pass: Optional[bool] = None
    lb_blocks: Dict[str, float] = {}
    complete: bool = True
    notes: List[str] = []

    @property
    def label(self) -> str:
        return f"{self.inequality}2 ({','.join(map(str, self.dims))})"


def reference_values(inequality: str) -> Dict[str, float]:
    """Sums of classical and quantum SATWAP bounds over the blocks of J or K."""
    c, q = classical_bound_formula(2, 2), quantum_bound(2, 2)
    extra = q if inequality == "K" else 0.0
    return {"c+q": c + q + extra, "q+q": 2 * q + extra}


def select_rows(rows: Optional[Sequence[str]]) -> List[tuple]:
    """Accepts J2, K2 or a single row such as J2:3; anything else is a ConfigError."""
    if not rows:
        return list(ROW_ORDER)
    selected = []
    for item in rows:
        inequality, _, dim = item.strip().upper().partition(":")
        inequality = inequality[:-1] if inequality.endswith("2") else inequality
        try:
            dim_value = int(dim) if dim else None
        except ValueError:
            raise ConfigError(f"Row {item!r} has a non-integer dimension")
        matched = [
            key
            for key in ROW_ORDER
            if key[0] == inequality and (dim_value is None or key[1] == dim_value)
        ]
        if not matched:
            known = ", ".join(f"{i}2:{d}" for i, d in ROW_ORDER)
            raise ConfigError(f"Unknown table row {item!r}, expected one of {known}")
        for key in matched:
            if key not in selected:
                selected.append(key)
    return selected


def _run(job: BoundJob, run_id: str, store: Optional[DuckDBStore], verbose: bool) -> RunRecord:
    return BoundFactory.create_bound(run_id, job, store).run(verbose)[0]


def reproduce_table1(
    run_id: str,
    rows: Optional[Sequence[str]] = None,
    budget_minutes: Optional[float] = None,
    seesaw: Optional[SeesawSettings] = None,
    moment: Optional[MomentSettings] = None,
    solver: Optional[SolverSettings] = None,
    store: Optional[DuckDBStore] = None,
    verbose: bool = False,
) -> List[TableRow]:
    seesaw = seesaw if seesaw else SeesawSettings()
    moment = moment if moment else table_moment_settings()
    solver = solver if solver else SolverSettings()
    deadline = time.monotonic() + 60 * budget_minutes if budget_minutes else math.inf
    j_upper: Dict[int, float] = {}
    table = []
    keys = select_rows(rows)
    with Progress(transient=True) as progress:
        if verbose:
            task = progress.add_task("[cyan]Bound table", total=len(keys))
        for inequality, dim in keys:
            lb_ref, ub_ref = PUBLISHED[(inequality, dim)]
            refs = reference_values(inequality)
            row = TableRow(
                inequality=inequality,
                dims=[dim, 2, 2],
                published_lb=lb_ref,
                published_ub=ub_ref,
                classical_plus_quantum=refs["c+q"],
                quantum_plus_quantum=refs["q+q"],
            )
            table.append(row)
            if time.monotonic() > deadline:
                row.complete = False
                row.notes.append("budget exceeded, row skipped")
                continue
            common = dict(inequality=inequality, d=2, dims=[dim, 2, 2], solver=solver)
            row_seesaw = seesaw
            if deadline != math.inf:
                row_seesaw = seesaw.model_copy(
                    update={"time_budget": max(0.0, deadline - time.monotonic())}
                )
            try:
                lower = _run(
                    BoundJob(
                        name=f"{row.label} lb", method=Method.seesaw, seesaw=row_seesaw, **common
                    ),
                    run_id,
                    store,
                    verbose,
                )
                row.lb, row.lb_blocks = lower.value, lower.per_block
                row.complete = row.complete and lower.complete
                if inequality == "J" or dim not in j_upper:
                    # Once Alice holds both qubits the block sum q+q is attained.
                    j_method = Method.split if dim >= 4 else Method.moment
                    upper_j = _run(
                        BoundJob(
                            name=f"J2 ({dim},2,2) ub",
                            method=j_method,
                            moment=moment,
                            **{**common, "inequality": "J"},
                        ),
                        run_id,
                        store,
                        verbose,
                    )
                    row.complete = row.complete and upper_j.complete
                    if upper_j.value is not None:
                        j_upper[dim] = upper_j.value
                if inequality == "J":
                    row.ub = j_upper.get(dim)
                elif dim in j_upper:
                    upper = _run(
                        BoundJob(
                            name=f"{row.label} ub",
                            method=Method.split,
                            j_upper_bound=j_upper[dim],
                            **common,
                        ),
                        run_id,
                        store,
                        verbose,
                    )
                    row.ub = upper.value
            except BellboundError as e:
                row.complete = False
                row.notes.append(str(e))
            if row.lb is not None:
                row.lb_pass = row.lb >= lb_ref - LB_TOL
            if row.ub is not None:
                row.ub_pass = abs(row.ub - ub_ref) <= UB_TOL
            if verbose:
                progress.update(task, advance=1)
    return table


def print_table1(rows: List[TableRow]):
    table = Table("Row", "lb", "published lb", "ub", "published ub", "c+q", "q+q", "Blocks", "Pass")
    mark = lambda ok: "-" if ok is None else (":white_check_mark:" if ok else ":x:")
    fmt = lambda v: "-" if v is None else f"{v:.6f}"
    for row in rows:
        blocks = ", ".join(f"{v:.4f}" for v in sorted(row.lb_blocks.values()))
        table.add_row(
            row.label,
            fmt(row.lb),
            f"{row.published_lb:.4f}",
            fmt(row.ub),
            f"{row.published_ub:.4f}",
            f"{row.classical_plus_quantum:.4f}",
            f"{row.quantum_plus_quantum:.4f}",
            blocks,
            f"{mark(row.lb_pass)} {mark(row.ub_pass)}",
        )
    console.print(table)
    for row in rows:
        for note in row.notes:
            console.print(f"[yellow]{row.label}[/yellow]: {note}")
