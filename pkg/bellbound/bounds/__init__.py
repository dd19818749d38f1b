from typing import Optional, Union

from bellbound.bounds.base import BaseBound, BoundOutcome
from bellbound.bounds.lower import ClassicalBound, FixtureBound, SeesawBound
from bellbound.bounds.upper import MomentBound, SplitBound
from bellbound.loader.models import BoundJob, Method
from bellbound.stores import DuckDBStore


BOUND_TYPE_MAP = {
    Method.seesaw: SeesawBound,
    Method.moment: MomentBound,
    Method.split: SplitBound,
    Method.bruteforce: ClassicalBound,
    Method.evaluate: FixtureBound,
}

BOUND_TYPES = Union[
    BaseBound, SeesawBound, MomentBound, SplitBound, ClassicalBound, FixtureBound
]


class BoundFactory:
    @staticmethod
    def create_bound(
        run_id: str, job: BoundJob, store: Optional[DuckDBStore] = None
    ) -> BOUND_TYPES:
        bound_class = BOUND_TYPE_MAP.get(job.method, None)
        if not bound_class:
            raise Exception(f"Bound Method {job.method} not implemented yet")
        return bound_class(run_id, job, store)


__all__ = [
    "BOUND_TYPE_MAP",
    "BaseBound",
    "BoundFactory",
    "BoundOutcome",
    "ClassicalBound",
    "FixtureBound",
    "MomentBound",
    "SeesawBound",
    "SplitBound",
]
