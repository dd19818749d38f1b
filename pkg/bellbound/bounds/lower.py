from typing import Dict, Optional, Tuple

from bellbound.bounds.base import BaseBound, BoundOutcome
from bellbound.bounds.seesaw import SeesawResult, constrained_seesaw, seesaw
from bellbound.bounds.split import J_BLOCKS
from bellbound.errors import UsageError
from bellbound.inequalities import (
    BellFunctional,
    InequalityFactory,
    classical_max_bruteforce,
    evaluate,
    per_block_values,
    restrict_blocks,
    reuse_for_dave,
)
from bellbound.loader.fixtures import load_fixture
from bellbound.loader.models import BoundJob, InequalityType, ScenarioSpec
from bellbound.scenario import build_K_scenario


def block_spread(per_block: Dict[str, float]) -> Optional[float]:
    """max - min over the A|B and A|C block values."""
    values = [per_block[b] for b in J_BLOCKS if b in per_block]
    if len(values) < 2:
        return None
    return max(values) - min(values)


class SeesawBound(BaseBound):
    def pin(self) -> Tuple[Optional[BellFunctional], Optional[float]]:
        job = self.job
        if job.pin_j is not None and job.pin_blocks:
            raise UsageError("Use either pin_j or pin_blocks, not both")
        if job.pin_j is not None:
            if self.scenario.inequality != InequalityType.K:
                raise UsageError("pin_j needs a K functional")
            return restrict_blocks(self.functional, J_BLOCKS), job.pin_j
        if job.pin_blocks:
            if len(job.pin_blocks) != 1:
                raise UsageError("pin_blocks accepts one block, use pin_j for A|B + A|C")
            (label, value), = job.pin_blocks.items()
            return restrict_blocks(self.functional, [label]), value
        return None, None

    def compute(self, verbose: bool = False) -> BoundOutcome:
        cfg = self.job.seesaw
        pin, pin_value = self.pin()
        if pin is None:
            result = seesaw(self.scenario, self.functional, cfg, self.job.solver, verbose)
        else:
            result = constrained_seesaw(
                self.functional, pin, pin_value, cfg, self.job.solver, verbose
            )
        return self.outcome(result)

    def outcome(self, result: SeesawResult) -> BoundOutcome:
        extras = {
            "converged": result.converged,
            "sweeps": len(result.sweep_trace),
            "restarts_completed": result.restarts_completed,
            "restart_values": result.restart_values,
            "block_spread": block_spread(result.per_block_values),
        }
        if self.job.pin_j is not None or self.job.pin_blocks:
            extras["pin_value"] = self.job.pin_j
            extras["pin_blocks"] = self.job.pin_blocks
        return BoundOutcome(
            value=result.best_value,
            per_block=result.per_block_values,
            complete=result.restarts_completed == self.job.seesaw.restarts,
            seed=result.seed_of_best,
            notes=result.notes,
            extras=extras,
        )


class ClassicalBound(BaseBound):
    def compute(self, verbose: bool = False) -> BoundOutcome:
        value = classical_max_bruteforce(self.functional, self.job.max_assignments)
        return BoundOutcome(value=value, extras={"assignments_cap": self.job.max_assignments})


class FixtureBound(BaseBound):
    """Value of a stored strategy, a certified lower bound once it loads cleanly."""

    def __init__(self, run_id: str, job: BoundJob, store=None) -> None:
        if not job.fixture:
            raise UsageError("method evaluate needs a fixture path")
        self.run_id = run_id
        self.job = job
        self.store = store
        self.fixture = load_fixture(job.fixture)
        self.scenario = self.fixture.scenario
        self.strategy = self.fixture.strategy
        if job.reuse_for_dave:
            if self.scenario.inequality != InequalityType.J:
                raise UsageError("reuse_for_dave lifts J fixtures only")
            self.scenario = build_K_scenario(
                self.scenario.d, self.scenario.layout.dims, job.sign_last_term, self.scenario.m
            )
            self.strategy = reuse_for_dave(self.strategy, self.scenario, job.reuse_for_dave)
            self.functional = InequalityFactory.create_functional(self.scenario, job.weights)
        else:
            self.functional = self.fixture.functional
        self.spec = ScenarioSpec.from_dims(
            self.scenario.inequality,
            self.scenario.d,
            self.scenario.layout.dims,
            m=self.scenario.m,
            sign_last_term=self.scenario.sign_last_term,
        )

    def compute(self, verbose: bool = False) -> BoundOutcome:
        blocks = per_block_values(self.functional, self.strategy)
        extras = {
            "fixture": self.fixture.name,
            "max_repair": self.fixture.max_repair,
            "reported": self.fixture.reported,
            "state_source": self.fixture.state_source,
            "block_spread": block_spread(blocks),
        }
        if self.fixture.printed_value is not None:
            extras["printed_state_value"] = self.fixture.printed_value
        if self.job.reuse_for_dave:
            extras["reuse_for_dave"] = self.job.reuse_for_dave
        return BoundOutcome(
            value=evaluate(self.functional, self.strategy),
            per_block=blocks,
            extras=extras,
        )
