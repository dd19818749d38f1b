import hashlib
import time

from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional

from rich import print

from bellbound import __version__
from bellbound.inequalities import BellFunctional, InequalityFactory
from bellbound.loader.models import BoundJob, RunRecord
from bellbound.scenario import Scenario, ScenarioFactory
from bellbound.stores import DuckDBStore


@dataclass
class BoundOutcome:
    value: Optional[float]
    per_block: Dict[str, float] = field(default_factory=dict)
    complete: bool = True
    seed: Optional[int] = None
    notes: List[str] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)


class BaseBound:
    def __init__(
        self,
        run_id: str,
        job: BoundJob,
        store: Optional[DuckDBStore] = None,
    ) -> None:
        self.run_id = run_id
        self.job = job
        self.store = store
        self.spec = job.scenario_spec()
        self.scenario: Scenario = ScenarioFactory.create_scenario(self.spec)
        self.functional: BellFunctional = InequalityFactory.create_functional(
            self.scenario, job.weights
        )

    def generate_record_id(self) -> str:
        encode = lambda s: str(s).encode("utf-8")
        m = hashlib.sha256()
        m.update(encode(self.run_id))
        m.update(encode(self.job.name))
        m.update(encode(self.scenario.digest()))
        return m.hexdigest()

    def compute(self, verbose: bool = False) -> BoundOutcome:
        if verbose:
            print("Called BaseBound")
        raise Exception("Compute Method Not Implemented Yet")

    def append_result(
        self,
        outcome: BoundOutcome,
        wall_time: float,
        results: List[RunRecord],
        run_time: datetime,
        verbose: bool = False,
    ) -> List[RunRecord]:
        record = RunRecord(
            run_id=self.run_id,
            name=self.job.name,
            scenario=self.spec,
            method=self.job.method,
            config=self.job.model_dump(mode="json"),
            value=outcome.value,
            per_block=outcome.per_block,
            wall_time=wall_time,
            seed=outcome.seed,
            version=__version__,
            complete=outcome.complete,
            notes=outcome.notes,
            extras={"record_id": self.generate_record_id(), **outcome.extras},
        )
        if verbose:
            print(f"[cyan]{record.name}[/cyan]: {record.value}")
        if self.store is not None:
            self.store.insert_results(record, run_time)
        results.append(record)
        return results

    def run(self, verbose: bool = False) -> List[RunRecord]:
        results = []
        run_time = datetime.now()
        start = time.perf_counter()
        outcome = self.compute(verbose)
        self.append_result(outcome, time.perf_counter() - start, results, run_time, verbose)
        return results
