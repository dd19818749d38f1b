import itertools

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from pydantic import BaseModel

from bellbound.errors import (
    BudgetExceeded,
    InvalidStrategy,
    ScenarioMismatch,
    UsageError,
)
from bellbound.loader.models import TOLERANCES
from bellbound.quantum.core import (
    Measurement,
    hermitian_part,
    ket_to_density,
    min_eigenvalue,
    partial_trace,
)
from bellbound.scenario.base import Scenario, factor_swap


class ProbabilityTerm(BaseModel):
    """coefficient * p(left = right + shift mod d), inside one partition block."""

    left: str
    right: str
    shift: int
    coefficient: float
    block: str

    class Config:
        frozen = True


class BellFunctional(BaseModel):
    scenario: Scenario
    terms: Tuple[ProbabilityTerm, ...]
    # Per-block weight and constant; a block contributes weight * (terms + offset).
    weights: Dict[str, float] = {}
    offsets: Dict[str, float] = {}
    constant_offset: float = 0.0

    class Config:
        frozen = True

    @property
    def blocks(self) -> List[str]:
        seen = []
        for term in self.terms:
            if term.block not in seen:
                seen.append(term.block)
        for block in self.weights:
            if block not in seen:
                seen.append(block)
        return seen

    def weight(self, block: str) -> float:
        return self.weights.get(block, 1.0)

    def validate_terms(self):
        for term in self.terms:
            left = self.scenario.symbol(term.left)
            right = self.scenario.symbol(term.right)
            if not self.scenario.commute(left, right):
                raise ScenarioMismatch(
                    f"Probability term pairs non-commuting symbols {term.left}, {term.right}"
                )
        return self


@dataclass
class Strategy:
    state: np.ndarray
    assignment: Dict[str, Measurement] = field(default_factory=dict)

    @classmethod
    def from_ket(cls, ket: np.ndarray, assignment: Dict[str, Measurement]) -> "Strategy":
        return cls(ket_to_density(ket), dict(assignment))

    def validate(self, scenario: Scenario, tol: Optional[float] = None):
        n = scenario.layout.total_dim
        if self.state.shape != (n, n):
            raise InvalidStrategy(
                f"State of shape {self.state.shape} does not match layout dimension {n}"
            )
        trace_tol = TOLERANCES.unit_trace if tol is None else tol
        psd_tol = TOLERANCES.psd if tol is None else tol
        if abs(np.trace(self.state) - 1) > trace_tol:
            raise InvalidStrategy(f"State trace is {np.trace(self.state).real:.6f}")
        if min_eigenvalue(self.state) < -psd_tol:
            raise InvalidStrategy("State is not PSD")
        for symbol in scenario.symbols:
            if symbol.name not in self.assignment:
                raise InvalidStrategy(f"No measurement assigned to {symbol.name}")
            measurement = self.assignment[symbol.name]
            if measurement.dim != scenario.support_dim(symbol):
                raise InvalidStrategy(
                    f"{symbol.name} acts on dimension {scenario.support_dim(symbol)}, "
                    f"measurement has dimension {measurement.dim}"
                )
            if measurement.outcomes != symbol.outcomes:
                raise InvalidStrategy(
                    f"{symbol.name} has {symbol.outcomes} outcomes, "
                    f"measurement has {measurement.outcomes}"
                )
            measurement.validate(tol)
        return self


def compose(weights: Sequence[float], blocks: Sequence[BellFunctional]) -> BellFunctional:
    if len(weights) != len(blocks) or not blocks:
        raise UsageError(f"{len(weights)} weights for {len(blocks)} functionals")
    scenario = blocks[0].scenario
    terms, new_weights, offsets, constant = [], {}, {}, 0.0
    for w, f in zip(weights, blocks):
        if f.scenario != scenario:
            raise ScenarioMismatch("Composed functionals must share one scenario")
        for block in f.blocks:
            if block in new_weights:
                raise UsageError(f"Block {block} appears twice in the composition")
            new_weights[block] = w * f.weight(block)
            if block in f.offsets:
                offsets[block] = f.offsets[block]
        terms.extend(f.terms)
        constant += w * f.constant_offset
    return BellFunctional(
        scenario=scenario,
        terms=tuple(terms),
        weights=new_weights,
        offsets=offsets,
        constant_offset=constant,
    )


def restrict_blocks(f: BellFunctional, labels: Sequence[str]) -> BellFunctional:
    missing = [b for b in labels if b not in f.blocks]
    if missing:
        raise UsageError(f"Blocks {missing} are not part of the functional {f.blocks}")
    return BellFunctional(
        scenario=f.scenario,
        terms=tuple(t for t in f.terms if t.block in labels),
        weights={b: w for b, w in f.weights.items() if b in labels},
        offsets={b: o for b, o in f.offsets.items() if b in labels},
    )


def _embedded(f: BellFunctional, assignment: Dict[str, Measurement]):
    scenario = f.scenario
    cache = {}
    for term in f.terms:
        for name in (term.left, term.right):
            if name not in cache:
                if name not in assignment:
                    raise InvalidStrategy(f"No measurement assigned to {name}")
                symbol = scenario.symbol(name)
                cache[name] = [scenario.embed(m, symbol) for m in assignment[name].matrices]
    return cache


def to_bell_operator(f: BellFunctional, assignment: Dict[str, Measurement]) -> np.ndarray:
    n = f.scenario.layout.total_dim
    ops = _embedded(f, assignment)
    g = np.zeros((n, n), dtype=complex)
    for term in f.terms:
        left, right = ops[term.left], ops[term.right]
        d = len(left)
        scale = f.weight(term.block) * term.coefficient
        for b, effect in enumerate(right):
            g += scale * (left[(b + term.shift) % d] @ effect)
    constant = f.constant_offset + sum(f.weight(b) * o for b, o in f.offsets.items())
    return hermitian_part(g) + constant * np.eye(n)


def evaluate(f: BellFunctional, strategy: Strategy, tol: Optional[float] = None) -> float:
    strategy.validate(f.scenario, tol)
    return float(np.real(np.trace(strategy.state @ to_bell_operator(f, strategy.assignment))))


def per_block_values(f: BellFunctional, strategy: Strategy) -> Dict[str, float]:
    """Weighted contribution of every block; they sum to evaluate minus the constant."""
    return {
        block: float(
            np.real(
                np.trace(
                    strategy.state
                    @ to_bell_operator(restrict_blocks(f, [block]), strategy.assignment)
                )
            )
        )
        for block in f.blocks
    }


def effective_operators(
    f: BellFunctional,
    state: np.ndarray,
    assignment: Dict[str, Measurement],
    group: Sequence[str],
) -> Tuple[Dict[str, List[np.ndarray]], float]:
    """Writes tr(rho G) as sum over group effects tr(E_{s,a} W_{s,a}) plus a constant.

    Every term must have exactly one symbol in ``group``; the others stay fixed.
    """
    scenario = f.scenario
    layout = scenario.layout
    members = set(group)
    result = {}
    for name in group:
        symbol = scenario.symbol(name)
        dim = scenario.support_dim(symbol)
        result[name] = [np.zeros((dim, dim), dtype=complex) for _ in range(symbol.outcomes)]
    fixed = {}
    for term in f.terms:
        in_left, in_right = term.left in members, term.right in members
        if in_left == in_right:
            raise UsageError(
                f"Term {term.left}/{term.right} must have exactly one symbol in the group"
            )
        mine, other = (term.left, term.right) if in_left else (term.right, term.left)
        if other not in fixed:
            fixed[other] = [
                scenario.embed(m, scenario.symbol(other)) for m in assignment[other].matrices
            ]
        keep = [layout.index(s) for s in scenario.symbol(mine).support]
        d = len(fixed[other])
        scale = f.weight(term.block) * term.coefficient
        for b in range(d):
            # left outcome a = b + shift for right outcome b.
            if in_left:
                a_mine, b_other = (b + term.shift) % d, b
            else:
                a_mine, b_other = b, (b + term.shift) % d
            reduced = partial_trace(fixed[other][b_other] @ state, layout.dims, keep)
            result[mine][a_mine] += scale * reduced
    for name in result:
        result[name] = [hermitian_part(w) for w in result[name]]
    constant = f.constant_offset + sum(f.weight(b) * o for b, o in f.offsets.items())
    return result, constant


def classical_max_bruteforce(f: BellFunctional, cap: int = 10**7) -> float:
    """Exact maximum over deterministic outcome assignments."""
    symbols = list(f.scenario.symbols)
    counts = [s.outcomes for s in symbols]
    total = int(np.prod(counts, dtype=object))
    if total > cap:
        raise BudgetExceeded(f"{total} deterministic assignments exceed the cap {cap}")
    index = {s.name: i for i, s in enumerate(symbols)}
    constant = f.constant_offset + sum(f.weight(b) * o for b, o in f.offsets.items())
    if not f.terms:
        return float(constant)
    # Enumerate the leading symbols in Python and vectorize the rest.
    split = len(symbols)
    while split > 0 and int(np.prod(counts[split - 1 :], dtype=object)) <= 10**5:
        split -= 1
    tail = np.array(list(itertools.product(*[range(c) for c in counts[split:]])), dtype=int)
    tail = tail.reshape(-1, len(symbols) - split)
    best = -np.inf
    for head in itertools.product(*[range(c) for c in counts[:split]]):
        outcomes = np.hstack([np.tile(np.array(head, dtype=int), (len(tail), 1)), tail])
        values = np.full(len(tail), constant, dtype=float)
        for term in f.terms:
            d = f.scenario.symbol(term.left).outcomes
            left = outcomes[:, index[term.left]]
            right = outcomes[:, index[term.right]]
            hit = (left - right - term.shift) % d == 0
            values += f.weight(term.block) * term.coefficient * hit
        best = max(best, float(values.max()))
    return best


def swap_strategy(strategy: Strategy, scenario: Scenario) -> Strategy:
    """Relabels B <-> C and permutes the tensor factors of the state accordingly."""
    mapping = scenario.swap_map()
    p = scenario.swap_operator()
    layout = scenario.layout
    joint = factor_swap(
        (layout.dims[layout.index("B")], layout.dims[layout.index("C")]), 0, 1
    )
    assignment = {}
    for name, measurement in strategy.assignment.items():
        support = scenario.symbol(name).support
        if "B" in support and "C" in support:
            measurement = Measurement.from_matrices(
                [joint @ m @ joint.T for m in measurement.matrices],
                measurement.effects[0].kind,
            )
        assignment[mapping[name]] = measurement
    return Strategy(p @ strategy.state @ p.T, assignment)
