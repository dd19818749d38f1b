"""SATWAP inequalities with m settings and d outcomes.

The block functional is

    d * sum_k (alpha_k P_k - beta_k Q_k) - 2m * sum_k (alpha_k - beta_k)

where P_k collects p(A_i = B_i + k) and p(B_i = A_{i+1} + k), Q_k collects
p(A_i = B_i - k - 1) and p(B_i = A_{i+1} - k - 1), and the chain closes with
A_{m+1} = A_1 + 1. In this normalization the classical maximum equals
``classical_bound_formula`` and the quantum maximum is m(d - 1); for d = 2 the
block is CHSH / sqrt(2).
"""

import math

from typing import List

from pydantic import BaseModel

from bellbound.errors import UsageError
from bellbound.inequalities.base import BellFunctional, ProbabilityTerm
from bellbound.scenario.base import Scenario


def g(x: float, m: int, d: int) -> float:
    return 1.0 / math.tan(math.pi * (x + 1.0 / (2 * m)) / d)


class SatwapCoefficients(BaseModel):
    m: int
    d: int
    alpha: List[float]
    beta: List[float]

    @classmethod
    def compute(cls, m: int, d: int) -> "SatwapCoefficients":
        if m < 2 or d < 2:
            raise UsageError(f"SATWAP needs m >= 2 and d >= 2, got m={m}, d={d}")
        half = d // 2
        scale = math.tan(math.pi / (2 * m)) / (2 * d)
        alpha = [scale * (g(k, m, d) - g(half, m, d)) for k in range(half)]
        beta = [scale * (g(k + 1 - 1 / m, m, d) + g(half, m, d)) for k in range(half)]
        return cls(m=m, d=d, alpha=alpha, beta=beta)

    @property
    def offset(self) -> float:
        return -2 * self.m * sum(a - b for a, b in zip(self.alpha, self.beta))


def classical_bound_formula(m: int, d: int) -> float:
    return 0.5 * math.tan(math.pi / (2 * m)) * (
        (2 * m - 1) * g(0, m, d) - g(1 - 1 / m, m, d)
    ) - m


def quantum_bound(m: int, d: int) -> float:
    if m < 2 or d < 2:
        raise UsageError(f"SATWAP needs m >= 2 and d >= 2, got m={m}, d={d}")
    return float(m * (d - 1))


def satwap(scenario: Scenario, partition: str, m: int = None, d: int = None) -> BellFunctional:
    """SATWAP block between Alice and the other party of ``partition``."""
    m = scenario.m if m is None else m
    d = scenario.d if d is None else d
    symbols = scenario.symbols_of(partition)
    alice = sorted((s for s in symbols if s.party == "A"), key=lambda s: s.setting)
    other = sorted((s for s in symbols if s.party != "A"), key=lambda s: s.setting)
    if len(alice) != m or len(other) != m:
        raise UsageError(f"Partition {partition} needs {m} settings per party")
    coefficients = SatwapCoefficients.compute(m, d)
    terms = []
    for k in range(d // 2):
        p_weight = d * coefficients.alpha[k]
        q_weight = -d * coefficients.beta[k]
        for i in range(m):
            a_i, b_i = alice[i].name, other[i].name
            a_next = alice[(i + 1) % m].name
            # Closing the chain shifts A_1 by one.
            wrap = 1 if i == m - 1 else 0
            terms.append(ProbabilityTerm(left=a_i, right=b_i, shift=k, coefficient=p_weight, block=partition))
            terms.append(
                ProbabilityTerm(left=a_next, right=b_i, shift=-k - wrap, coefficient=p_weight, block=partition)
            )
            terms.append(
                ProbabilityTerm(left=a_i, right=b_i, shift=-k - 1, coefficient=q_weight, block=partition)
            )
            terms.append(
                ProbabilityTerm(left=a_next, right=b_i, shift=k + 1 - wrap, coefficient=q_weight, block=partition)
            )
    return BellFunctional(
        scenario=scenario,
        terms=tuple(t for t in terms if t.coefficient != 0.0),
        weights={partition: 1.0},
        offsets={partition: coefficients.offset},
    ).validate_terms()
