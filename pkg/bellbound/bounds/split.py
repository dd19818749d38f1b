from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

from bellbound.bounds.moments import upper_bound
from bellbound.errors import ScenarioMismatch, UsageError
from bellbound.inequalities import (
    BellFunctional,
    InequalityFactory,
    quantum_bound,
    restrict_blocks,
)
from bellbound.loader.models import InequalityType, MomentSettings, SolverSettings
from bellbound.scenario import build_J_scenario


J_BLOCKS = ["A|B", "A|C"]
EXTRA_BLOCK = "A|BC"


def effective_terms(f: BellFunctional) -> Tuple[Dict[Tuple[str, str, int], float], float]:
    """Weighted coefficient per (left, right, shift mod d) and the total constant."""
    d = f.scenario.d
    terms = defaultdict(float)
    for term in f.terms:
        terms[(term.left, term.right, term.shift % d)] += f.weight(term.block) * term.coefficient
    constant = f.constant_offset + sum(f.weight(b) * o for b, o in f.offsets.items())
    return dict(terms), constant


def _same_terms(a: Dict, b: Dict, tol: float) -> bool:
    return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= tol for k in set(a) | set(b))


def split_bound(
    f: BellFunctional,
    parts: Sequence[BellFunctional],
    part_bounds: Sequence[float],
    tol: float = 1e-9,
) -> float:
    """Sum of the part bounds, after checking the parts add up to ``f``."""
    if len(parts) != len(part_bounds) or not parts:
        raise UsageError(f"{len(parts)} parts given with {len(part_bounds)} bounds")
    total, constant = defaultdict(float), 0.0
    for part in parts:
        if part.scenario != f.scenario:
            raise ScenarioMismatch("Split parts must share the functional's scenario")
        terms, c = effective_terms(part)
        for key, value in terms.items():
            total[key] += value
        constant += c
    target, target_constant = effective_terms(f)
    if not _same_terms(target, total, tol) or abs(target_constant - constant) > tol:
        raise ScenarioMismatch("The parts do not add up to the functional")
    return float(sum(part_bounds))


def block_quantum_bound(f: BellFunctional, block: str) -> float:
    """Maximum of one weighted SATWAP block over unrestricted quantum models."""
    scenario = f.scenario
    w = f.weight(block)
    if w < 0 and scenario.d != 2:
        raise UsageError(
            f"A negative weight on {block} is only bounded by the quantum value for d = 2"
        )
    # For d = 2 the block is symmetric under relabeling one party's outcomes, min = -max.
    return abs(w) * quantum_bound(scenario.m, scenario.d)


def j_part_upper_bound(
    f: BellFunctional,
    moment: Optional[MomentSettings] = None,
    solver_settings: Optional[SolverSettings] = None,
    store=None,
    verbose: bool = False,
):
    """Moment relaxation of the A|B + A|C part, run on the matching J scenario."""
    scenario = f.scenario
    j_scenario = build_J_scenario(scenario.d, scenario.layout.dims, scenario.m)
    weights = [f.weight(b) for b in J_BLOCKS]
    j = InequalityFactory.create_functional(j_scenario, weights)
    return upper_bound(j_scenario, j, moment, solver_settings, store, verbose)


def k_split_bound(f: BellFunctional, j_bound: float) -> Tuple[float, Dict[str, float]]:
    """Upper bound on K: the J part's bound plus the quantum bound of the A|BC block."""
    if f.scenario.inequality != InequalityType.K:
        raise UsageError("The K split bound needs a K functional")
    j_part = restrict_blocks(f, J_BLOCKS)
    extra = restrict_blocks(f, [EXTRA_BLOCK])
    extra_bound = block_quantum_bound(f, EXTRA_BLOCK)
    value = split_bound(f, [j_part, extra], [j_bound, extra_bound])
    return value, {"J": float(j_bound), EXTRA_BLOCK: extra_bound}


def parts_of(f: BellFunctional) -> List[BellFunctional]:
    return [restrict_blocks(f, [b]) for b in f.blocks]
