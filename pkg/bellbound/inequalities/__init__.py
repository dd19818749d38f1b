from typing import Optional, Sequence

import numpy as np

from bellbound.errors import ScenarioMismatch, UsageError
from bellbound.inequalities.base import (
    BellFunctional,
    ProbabilityTerm,
    Strategy,
    classical_max_bruteforce,
    compose,
    effective_operators,
    evaluate,
    per_block_values,
    restrict_blocks,
    swap_strategy,
    to_bell_operator,
)
from bellbound.inequalities.satwap import (
    SatwapCoefficients,
    classical_bound_formula,
    quantum_bound,
    satwap,
)
from bellbound.loader.models import InequalityType
from bellbound.quantum.core import Measurement, tensor
from bellbound.scenario.base import Scenario


class InequalityFactory:
    @staticmethod
    def create_functional(
        scenario: Scenario, weights: Optional[Sequence[float]] = None
    ) -> BellFunctional:
        """SATWAP block, J_d or K_d for the scenario's template."""
        blocks = scenario.blocks
        if scenario.inequality == InequalityType.satwap:
            default = [1.0]
        elif scenario.inequality == InequalityType.J:
            default = [1.0, 1.0]
        elif scenario.inequality == InequalityType.K:
            default = [1.0, 1.0, 1.0]
        else:
            raise UsageError(f"Inequality {scenario.inequality} not implemented yet")
        weights = list(weights) if weights else default
        if len(weights) != len(blocks):
            raise UsageError(f"{len(weights)} weights given for blocks {blocks}")
        if scenario.inequality == InequalityType.K:
            weights[-1] *= scenario.sign_last_term
        return compose(weights, [satwap(scenario, block) for block in blocks])


def reuse_for_dave(strategy: Strategy, k_scenario: Scenario, source: str = "A|B") -> Strategy:
    """Lifts a J strategy to K by reusing Alice's and Bob's (or Charlie's) measurements."""
    if source not in ("A|B", "A|C"):
        raise UsageError(f"Dave can reuse A|B or A|C measurements, not {source}")
    if k_scenario.inequality != InequalityType.K:
        raise ScenarioMismatch("reuse_for_dave needs a K scenario")
    layout = k_scenario.layout
    dim_b = layout.dims[layout.index("B")]
    dim_c = layout.dims[layout.index("C")]
    assignment = dict(strategy.assignment)
    for x in range(1, k_scenario.m + 1):
        assignment[f"A{x}^A|BC"] = strategy.assignment[f"A{x}^{source}"]
        partner = strategy.assignment[f"{source[-1]}{x}^{source}"]
        if source == "A|B":
            lifted = [tensor(m, np.eye(dim_c)) for m in partner.matrices]
        else:
            lifted = [tensor(np.eye(dim_b), m) for m in partner.matrices]
        assignment[f"D{x}^A|BC"] = Measurement.from_matrices(lifted, partner.effects[0].kind)
    return Strategy(strategy.state, assignment)


__all__ = [
    "BellFunctional",
    "InequalityFactory",
    "ProbabilityTerm",
    "SatwapCoefficients",
    "Strategy",
    "classical_bound_formula",
    "classical_max_bruteforce",
    "compose",
    "effective_operators",
    "evaluate",
    "per_block_values",
    "quantum_bound",
    "restrict_blocks",
    "reuse_for_dave",
    "satwap",
    "swap_strategy",
    "to_bell_operator",
]
