"""Strategies stored as JSON, complex entries written as [re, im] pairs.

A fixture names its scenario (inequality, d, dims, optional sign_last_term and
weights), a state given as a ket or a density matrix in the |a b c> basis, and for
every measurement symbol either all effects or all but the last one. A state
entry of {"reconstruct": "top-eigenvector"} is rebuilt from the measurements
as the top eigenvector of their Bell operator; a "printed_ket" next to it is
evaluated for reference only.
"""

import json

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from bellbound.errors import InvalidStrategy, UsageError
from bellbound.inequalities import (
    BellFunctional,
    InequalityFactory,
    Strategy,
    evaluate,
    to_bell_operator,
)
from bellbound.loader.models import TOLERANCES, EffectKind, ScenarioSpec
from bellbound.quantum.core import (
    Measurement,
    hermitian_part,
    hermiticity_error,
    ket_to_density,
    nearest_measurement,
    top_eigenpair,
)
from bellbound.scenario import Scenario, ScenarioFactory


@dataclass
class Fixture:
    name: str
    scenario: Scenario
    functional: BellFunctional
    strategy: Strategy
    # Largest Frobenius change per measurement while repairing rounded input.
    repairs: Dict[str, float] = field(default_factory=dict)
    reported: Dict[str, Any] = field(default_factory=dict)
    description: Optional[str] = None
    # "printed" or "reconstructed".
    state_source: str = "printed"
    printed_value: Optional[float] = None

    @property
    def max_repair(self) -> float:
        return max(self.repairs.values(), default=0.0)


def to_complex(data, ndim: int) -> np.ndarray:
    """Nested lists of [re, im] pairs (or plain reals) to a complex array of rank ndim."""
    array = np.asarray(data, dtype=float)
    if array.ndim == ndim + 1 and array.shape[-1] == 2:
        return array[..., 0] + 1j * array[..., 1]
    if array.ndim != ndim:
        raise InvalidStrategy(f"Expected a rank {ndim} array, got shape {array.shape}")
    return array.astype(complex)


def load_state(payload: Dict[str, Any], dim: int, tol: float) -> np.ndarray:
    if "ket" in payload:
        ket = to_complex(payload["ket"], 1).reshape(-1)
        if ket.shape != (dim,):
            raise InvalidStrategy(f"Ket of length {ket.shape[0]} for dimension {dim}")
        norm = np.linalg.norm(ket)
        if abs(norm - 1) > tol:
            raise InvalidStrategy(f"Ket norm {norm:.6f} is not 1 within {tol}")
        return ket_to_density(ket / norm)
    if "density" in payload:
        rho = to_complex(payload["density"], 2)
        if rho.shape != (dim, dim):
            raise InvalidStrategy(f"Density matrix of shape {rho.shape} for dimension {dim}")
        if hermiticity_error(rho) > tol:
            raise InvalidStrategy("Density matrix is not Hermitian")
        rho = hermitian_part(rho)
        return rho / np.real(np.trace(rho))
    raise UsageError("Fixture state needs a 'ket', a 'density' or a 'reconstruct' entry")


def reconstruct_state(
    payload: Dict[str, Any], functional: BellFunctional, assignment
) -> np.ndarray:
    method = payload["reconstruct"]
    if method != "top-eigenvector":
        raise UsageError(f"Unknown state reconstruction '{method}'")
    _, vector = top_eigenpair(to_bell_operator(functional, assignment))
    return ket_to_density(vector)


def load_measurement(
    name: str, effects: List[Any], outcomes: int, dim: int, repair_tol: float
):
    matrices = [to_complex(e, 2) for e in effects]
    if any(m.shape != (dim, dim) for m in matrices):
        raise InvalidStrategy(f"{name}: effects must be {dim}x{dim}")
    if len(matrices) == outcomes - 1:
        raw = Measurement.completed(matrices).matrices
    elif len(matrices) == outcomes:
        raw = matrices
    else:
        raise InvalidStrategy(f"{name}: {len(matrices)} effects for {outcomes} outcomes")
    repaired = nearest_measurement([hermitian_part(m) for m in raw], EffectKind.general_positive)
    change = max(float(np.linalg.norm(r - m)) for r, m in zip(repaired.matrices, raw))
    if change > repair_tol:
        raise InvalidStrategy(
            f"{name}: effects are {change:.2e} away from a valid measurement"
        )
    return repaired, change


def load_fixture(
    path: str,
    tol: Optional[float] = None,
    repair_tol: Optional[float] = None,
) -> Fixture:
    tol = TOLERANCES.fixture if tol is None else tol
    repair_tol = TOLERANCES.fixture_repair if repair_tol is None else repair_tol
    with open(path, "r") as stream:
        try:
            data = json.load(stream)
        except json.JSONDecodeError as e:
            raise UsageError(f"Invalid fixture {path}: {e}")
    spec = ScenarioSpec.from_dims(
        data.get("inequality", "J"),
        data.get("d", 2),
        tuple(data["dims"]),
        m=data.get("m", 2),
        sign_last_term=data.get("sign_last_term", 1),
        weights=data.get("weights"),
    )
    scenario = ScenarioFactory.create_scenario(spec)
    assignment, repairs = {}, {}
    for symbol in scenario.symbols:
        if symbol.name not in data["measurements"]:
            raise InvalidStrategy(f"Fixture has no measurement for {symbol.name}")
        assignment[symbol.name], repairs[symbol.name] = load_measurement(
            symbol.name,
            data["measurements"][symbol.name],
            symbol.outcomes,
            scenario.support_dim(symbol),
            repair_tol,
        )
    functional = InequalityFactory.create_functional(scenario, spec.weights)
    payload = data["state"]
    printed_value = None
    if "reconstruct" in payload:
        state = reconstruct_state(payload, functional, assignment)
        if "printed_ket" in payload:
            printed = load_state({"ket": payload["printed_ket"]}, scenario.layout.total_dim, tol)
            printed_value = evaluate(functional, Strategy(printed, assignment))
    else:
        state = load_state(payload, scenario.layout.total_dim, tol)
    strategy = Strategy(state, assignment).validate(scenario)
    return Fixture(
        name=data.get("name", path),
        scenario=scenario,
        functional=functional,
        strategy=strategy,
        repairs=repairs,
        reported=data.get("reported", {}),
        description=data.get("description"),
        state_source="reconstructed" if "reconstruct" in payload else "printed",
        printed_value=printed_value,
    )
