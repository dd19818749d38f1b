from typing import Sequence, Tuple

from bellbound.errors import DimensionMismatch, UsageError
from bellbound.loader.models import InequalityType, ScenarioSpec
from bellbound.scenario.base import (
    MeasurementSymbol,
    Scenario,
    SiteLayout,
    embed,
    layout_from,
)


def _check_dims(dims: Sequence[int], sites: int) -> Tuple[int, ...]:
    dims = tuple(int(k) for k in dims)
    if len(dims) != sites:
        raise DimensionMismatch(f"Expected {sites} site dimensions, got {dims}")
    if any(k < 2 for k in dims):
        raise DimensionMismatch(f"Site dimensions must be at least 2, got {dims}")
    return dims


def _pair_symbols(
    left: str, right: str, right_support: Tuple[str, ...], partition: str, m: int, d: int
):
    alice = [
        MeasurementSymbol(party=left, partition=partition, setting=x, outcomes=d, support=("A",))
        for x in range(1, m + 1)
    ]
    other = [
        MeasurementSymbol(
            party=right, partition=partition, setting=y, outcomes=d, support=right_support
        )
        for y in range(1, m + 1)
    ]
    return alice, other


def build_J_scenario(d: int, dims: Sequence[int], m: int = 2) -> Scenario:
    """Alice measures twice on A, once paired with Bob and once with Charlie."""
    dims = _check_dims(dims, 3)
    a_b, bob = _pair_symbols("A", "B", ("B",), "A|B", m, d)
    a_c, charlie = _pair_symbols("A", "C", ("C",), "A|C", m, d)
    return Scenario(
        layout=layout_from(("A", "B", "C"), dims),
        symbols=tuple(a_b + a_c + bob + charlie),
        inequality=InequalityType.J.value,
        d=d,
        m=m,
    )


def build_K_scenario(
    d: int, dims: Sequence[int], sign_last_term: int = 1, m: int = 2
) -> Scenario:
    """J scenario plus Alice against Dave, who acts on the joint B, C system."""
    if sign_last_term not in (1, -1):
        raise UsageError(f"sign_last_term must be +1 or -1, got {sign_last_term}")
    j = build_J_scenario(d, dims, m)
    a_bc, dave = _pair_symbols("A", "D", ("B", "C"), "A|BC", m, d)
    return Scenario(
        layout=j.layout,
        symbols=j.symbols + tuple(a_bc + dave),
        inequality=InequalityType.K.value,
        d=d,
        m=m,
        sign_last_term=sign_last_term,
    )


def build_satwap_scenario(m: int, d: int, dims: Sequence[int] = None) -> Scenario:
    dims = _check_dims(dims if dims is not None else (d, d), 2)
    alice, bob = _pair_symbols("A", "B", ("B",), "A|B", m, d)
    return Scenario(
        layout=layout_from(("A", "B"), dims),
        symbols=tuple(alice + bob),
        inequality=InequalityType.satwap.value,
        d=d,
        m=m,
    )


class ScenarioFactory:
    @staticmethod
    def create_scenario(spec: ScenarioSpec) -> Scenario:
        names = tuple(site.name for site in spec.sites)
        if spec.inequality == InequalityType.satwap:
            if names != ("A", "B"):
                raise UsageError(f"satwap scenarios use sites A, B; got {names}")
            return build_satwap_scenario(spec.m, spec.d, spec.dims)
        if names != ("A", "B", "C"):
            raise UsageError(f"J and K scenarios use sites A, B, C; got {names}")
        if spec.inequality == InequalityType.J:
            return build_J_scenario(spec.d, spec.dims, spec.m)
        if spec.inequality == InequalityType.K:
            return build_K_scenario(spec.d, spec.dims, spec.sign_last_term, spec.m)
        raise UsageError(f"Inequality {spec.inequality} not implemented yet")


__all__ = [
    "MeasurementSymbol",
    "Scenario",
    "ScenarioFactory",
    "SiteLayout",
    "build_J_scenario",
    "build_K_scenario",
    "build_satwap_scenario",
    "embed",
]
