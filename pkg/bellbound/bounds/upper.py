from typing import Optional

from bellbound.bounds.base import BaseBound, BoundOutcome
from bellbound.bounds.moments import upper_bound
from bellbound.bounds.split import (
    block_quantum_bound,
    j_part_upper_bound,
    k_split_bound,
    parts_of,
    split_bound,
)
from bellbound.errors import UsageError
from bellbound.loader.models import BoundReport, InequalityType
from bellbound.stores import DuckDBStore


def report_extras(report: BoundReport) -> dict:
    return {
        "class_values": report.class_values,
        "basis_ranks": report.basis_ranks,
        "classes_solved": report.classes_solved,
        "classes_skipped": report.classes_skipped,
        "argmax_class": report.argmax_class,
        "near_optimal": report.near_optimal,
        "backends": report.backends,
        "face_dims": report.face_dims,
        "deterministic_cap": report.deterministic_cap,
    }


class MomentBound(BaseBound):
    def cache(self) -> Optional[DuckDBStore]:
        if self.job.moment.cache_path:
            return DuckDBStore(self.job.moment.cache_path)
        return self.store

    def compute(self, verbose: bool = False) -> BoundOutcome:
        if self.scenario.inequality == InequalityType.K:
            raise UsageError("K functionals are bounded with method split, not moment")
        report = upper_bound(
            self.scenario,
            self.functional,
            self.job.moment,
            self.job.solver,
            self.cache(),
            verbose,
        )
        return BoundOutcome(
            value=report.value,
            complete=report.complete and report.value is not None,
            seed=self.job.moment.seed,
            notes=report.notes,
            extras=report_extras(report),
        )


class SplitBound(MomentBound):
    def compute(self, verbose: bool = False) -> BoundOutcome:
        f = self.functional
        if self.scenario.inequality != InequalityType.K:
            parts = parts_of(f)
            bounds = [block_quantum_bound(f, b) for b in f.blocks]
            value = split_bound(f, parts, bounds)
            return BoundOutcome(value=value, per_block=dict(zip(f.blocks, bounds)))
        extras, notes, complete = {}, [], True
        if self.job.j_upper_bound is not None:
            j_bound = self.job.j_upper_bound
            extras["j_source"] = "given"
        else:
            report = j_part_upper_bound(f, self.job.moment, self.job.solver, self.cache(), verbose)
            if report.value is None:
                return BoundOutcome(value=None, complete=False, notes=report.notes)
            j_bound = report.value
            complete = report.complete
            notes = report.notes
            extras.update(report_extras(report))
            extras["j_source"] = "moment"
        value, per_part = k_split_bound(f, j_bound)
        return BoundOutcome(
            value=value,
            per_block=per_part,
            complete=complete,
            seed=self.job.moment.seed,
            notes=notes,
            extras=extras,
        )
