"""Lower bounds by alternating optimization over the state and two effect groups.

A sweep is: state step (top eigenvector of the Bell operator), then one conic
problem for all measurement families of group X, then the same for group Y.
Every accepted step is non-decreasing, so the sweep trace is monotone.
"""

import math
import time

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rich.console import Console
from scipy import linalg

from bellbound.errors import InfeasiblePin, SolverFailure, UsageError
from bellbound.inequalities.base import (
    BellFunctional,
    Strategy,
    effective_operators,
    evaluate,
    per_block_values,
    to_bell_operator,
)
from bellbound.loader.models import (
    TOLERANCES,
    EffectKind,
    SeesawSettings,
    SolverSettings,
)
from bellbound.quantum.core import (
    Measurement,
    as_rng,
    clip_psd,
    hermitian_part,
    ket_to_density,
    nearest_measurement,
    random_povm,
    round_to_projective,
    top_eigenpair,
)
from bellbound.solvers import (
    ConicProblem,
    LinearConstraint,
    Sense,
    SolverFactory,
    hermitian_basis,
)
from bellbound.solvers.base import BaseSolver


console = Console()

SeesawConfig = SeesawSettings


@dataclass
class SeesawResult:
    best_value: float
    best_strategy: Strategy
    per_block_values: Dict[str, float]
    sweep_trace: List[float]
    converged: bool
    seed_of_best: int
    # One entry per restart, None when the restart was skipped.
    restart_values: List[Optional[float]] = field(default_factory=list)
    restart_blocks: List[Optional[Dict[str, float]]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def restarts_completed(self) -> int:
        return sum(v is not None for v in self.restart_values)


@dataclass
class Pin:
    functional: BellFunctional
    # Accepted iterates keep evaluate(functional) >= bound.
    bound: float
    # Conic steps ask for bound + margin.
    margin: float = 0.0

    def value(self, state, assignment) -> float:
        return float(np.real(np.trace(state @ to_bell_operator(self.functional, assignment))))

    def met(self, state, assignment) -> bool:
        return self.value(state, assignment) >= self.bound

    def target(self, state, assignment) -> float:
        # Capped at the current value.
        return min(self.bound + self.margin, self.value(state, assignment))


class Objective:
    """Weighted sum of functionals over one scenario, e.g. pin_weight * pin + f."""

    def __init__(self, parts: Sequence[Tuple[float, BellFunctional]]) -> None:
        self.scenario = parts[0][1].scenario
        self.parts = [(w, f) for w, f in parts if w != 0]

    def operator(self, assignment: Dict[str, Measurement]) -> np.ndarray:
        return sum(w * to_bell_operator(f, assignment) for w, f in self.parts)

    def value(self, state: np.ndarray, assignment: Dict[str, Measurement]) -> float:
        return float(np.real(np.trace(state @ self.operator(assignment))))

    def effective(self, state, assignment, group):
        total, constant = {}, 0.0
        for w, f in self.parts:
            ops, c = effective_operators(f, state, assignment, group)
            constant += w * c
            for name, matrices in ops.items():
                scaled = [w * m for m in matrices]
                total[name] = (
                    [t + s for t, s in zip(total[name], scaled)] if name in total else scaled
                )
        return total, constant


def _as_objective(f) -> Objective:
    return f if isinstance(f, Objective) else Objective([(1.0, f)])


def default_group_split(scenario) -> Tuple[List[str], List[str]]:
    x = [s.name for s in scenario.symbols if s.party == "A"]
    y = [s.name for s in scenario.symbols if s.party != "A"]
    return x, y


def group_split(f: BellFunctional, x: Optional[Sequence[str]] = None):
    scenario = f.scenario
    if x is None:
        x, y = default_group_split(scenario)
    else:
        x = list(x)
        y = [n for n in scenario.names if n not in x]
    unknown = [n for n in x if n not in scenario.names]
    if unknown:
        raise UsageError(f"Group X names unknown symbols {unknown}")
    members = set(x)
    for term in f.terms:
        if (term.left in members) == (term.right in members):
            raise UsageError(
                f"Term {term.left}/{term.right} does not pair group X with group Y"
            )
    return list(x), y


def random_assignment(
    scenario, seed=None, effect_kind: EffectKind = EffectKind.general_positive
) -> Dict[str, Measurement]:
    rng = as_rng(seed)
    assignment = {}
    for symbol in scenario.symbols:
        povm = random_povm(scenario.support_dim(symbol), symbol.outcomes, rng)
        if effect_kind == EffectKind.projector:
            povm = round_to_projective(povm)
        assignment[symbol.name] = povm
    return assignment


def state_step(f, assignment: Dict[str, Measurement]) -> Tuple[np.ndarray, float]:
    value, vector = top_eigenpair(_as_objective(f).operator(assignment))
    return ket_to_density(vector), value


def pinned_state_step(
    f,
    pin: Pin,
    state: np.ndarray,
    assignment: Dict[str, Measurement],
    solver: BaseSolver,
) -> Tuple[np.ndarray, float]:
    """Top eigenvector when it satisfies the pin, otherwise an SDP over density matrices."""
    objective = _as_objective(f)
    candidate, value = state_step(objective, assignment)
    if pin.met(candidate, assignment):
        return candidate, value
    n = state.shape[0]
    problem = ConicProblem(
        anchors=[np.zeros((n, n), dtype=complex)],
        basis=[[h] for h in hermitian_basis(n)],
        objective=[objective.operator(assignment)],
        extra_linear=[
            LinearConstraint([np.eye(n)], 1.0, Sense.eq),
            LinearConstraint(
                [to_bell_operator(pin.functional, assignment)],
                pin.target(state, assignment),
                Sense.ge,
            ),
        ],
    )
    solution = solver.solve(problem)
    current = objective.value(state, assignment)
    if solution.usable:
        rho = clip_psd(solution.variable[0])
        rho = rho / np.real(np.trace(rho))
        new = objective.value(rho, assignment)
        if new >= current and pin.met(rho, assignment):
            return rho, new
    return state, current


def _dichotomic_optimum(weights: List[np.ndarray]) -> Measurement:
    """Exact maximizer of tr(E W_0) + tr((1 - E) W_1): the positive part of W_0 - W_1."""
    values, vectors = linalg.eigh(hermitian_part(weights[0] - weights[1]))
    kept = vectors[:, values > 0]
    e0 = kept @ kept.conj().T
    return Measurement.from_matrices([e0, np.eye(e0.shape[0]) - e0], EffectKind.projector)


def _effects_problem(scenario, group, weights, pin_weights=None, pin_bound=None):
    anchors, objective, pin_functional, families = [], [], [], []
    for name in group:
        symbol = scenario.symbol(name)
        dim = scenario.support_dim(symbol)
        families.append((name, len(anchors), symbol.outcomes, dim))
        for a in range(symbol.outcomes):
            # The last effect is the identity minus the others.
            last = a == symbol.outcomes - 1
            anchor = np.eye(dim, dtype=complex) if last else np.zeros((dim, dim), dtype=complex)
            anchors.append(anchor)
            objective.append(weights[name][a])
            if pin_weights is not None:
                pin_functional.append(pin_weights[name][a])
    zeros = [np.zeros_like(a) for a in anchors]
    basis = []
    for name, start, outcomes, dim in families:
        for a in range(outcomes - 1):
            for h in hermitian_basis(dim):
                row = list(zeros)
                row[start + a] = h
                row[start + outcomes - 1] = -h
                basis.append(row)
    extra = []
    if pin_weights is not None:
        extra.append(LinearConstraint(pin_functional, pin_bound, Sense.ge))
    return ConicProblem(anchors, basis, objective, extra), families


def effects_step(
    f,
    state: np.ndarray,
    assignment: Dict[str, Measurement],
    group: Sequence[str],
    solver: Optional[BaseSolver] = None,
    effect_kind: EffectKind = EffectKind.general_positive,
    pin: Optional[Pin] = None,
    closed_form: bool = True,
) -> Tuple[Dict[str, Measurement], float]:
    """Maximizes the objective over the effects of ``group`` with the rest fixed.

    Returns the previous assignment when no candidate improves the value.
    """
    objective = _as_objective(f)
    scenario = objective.scenario
    current = objective.value(state, assignment)
    weights, _ = objective.effective(state, assignment, group)
    dichotomic = all(scenario.symbol(n).outcomes == 2 for n in group)
    candidate = dict(assignment)
    if pin is None and closed_form and dichotomic:
        for name in group:
            candidate[name] = _dichotomic_optimum(weights[name])
    else:
        solver = solver if solver else SolverFactory.create_solver()
        pin_weights, pin_bound = None, None
        if pin is not None:
            pin_weights, pin_constant = effective_operators(
                pin.functional, state, assignment, group
            )
            pin_bound = pin.target(state, assignment) - pin_constant
        problem, families = _effects_problem(scenario, group, weights, pin_weights, pin_bound)
        solution = solver.solve(problem)
        if not solution.usable:
            return assignment, current
        for name, start, outcomes, _ in families:
            candidate[name] = nearest_measurement(solution.variable[start : start + outcomes])
    if effect_kind == EffectKind.projector:
        for name in group:
            candidate[name] = round_to_projective(candidate[name])
    value = objective.value(state, candidate)
    if value < current or (pin is not None and not pin.met(state, candidate)):
        return assignment, current
    return candidate, value


def _sweep(objective, state, assignment, groups, solver, cfg, pin=None):
    if pin is None:
        state, _ = state_step(objective, assignment)
    else:
        state, _ = pinned_state_step(objective, pin, state, assignment, solver)
    for group in groups:
        assignment, _ = effects_step(
            objective,
            state,
            assignment,
            group,
            solver,
            cfg.effect_kind,
            pin,
            cfg.closed_form_dichotomic,
        )
    return state, assignment, objective.value(state, assignment)


def _iterate(
    objective,
    state,
    assignment,
    groups,
    solver,
    cfg,
    pin=None,
    sweeps=None,
    stop=None,
    deadline=None,
):
    trace, streak, converged = [], 0, False
    for _ in range(cfg.max_sweeps if sweeps is None else sweeps):
        if deadline is not None and time.monotonic() > deadline:
            break
        state, assignment, value = _sweep(objective, state, assignment, groups, solver, cfg, pin)
        if stop is not None and stop(state, assignment):
            trace.append(value)
            break
        if trace:
            improvement = (value - trace[-1]) / max(1.0, abs(trace[-1]))
            streak = streak + 1 if improvement < cfg.convergence_tol else 0
        trace.append(value)
        if streak >= cfg.patience:
            converged = True
            break
    return state, assignment, trace, converged


def final_cleanup(strategy: Strategy, effect_kind: EffectKind) -> Strategy:
    """Hermitian part, PSD clipping and renormalization of state and effects."""
    state = clip_psd(strategy.state)
    state = state / np.real(np.trace(state))
    assignment = {}
    for name, measurement in strategy.assignment.items():
        cleaned = nearest_measurement(measurement.matrices)
        if effect_kind == EffectKind.projector:
            cleaned = round_to_projective(cleaned)
        assignment[name] = cleaned
    return Strategy(state, assignment)


RESTART_ERRORS = (
    np.linalg.LinAlgError,
    linalg.LinAlgError,
    SolverFailure,
    ValueError,
    IndexError,
    ArithmeticError,
)


def _warm_up(f, pin: Pin, state, assignment, groups, solver, cfg, deadline=None):
    """Maximizes weight * pin + f, raising the weight until the pin is met."""
    weight = cfg.pin_weight
    for _ in range(max(1, cfg.pin_escalations)):
        warm = Objective([(weight, pin.functional), (1.0, f)])
        state, assignment, _, _ = _iterate(
            warm,
            state,
            assignment,
            groups,
            solver,
            cfg,
            sweeps=cfg.warmup_sweeps,
            stop=pin.met,
            deadline=deadline,
        )
        if pin.met(state, assignment):
            break
        weight *= 4
    return state, assignment


def run_restart(
    f: BellFunctional,
    cfg: SeesawSettings,
    solver_settings: SolverSettings,
    seed: int,
    pin_functional: Optional[BellFunctional] = None,
    pin_value: Optional[float] = None,
    deadline: Optional[float] = None,
):
    """One restart; returns (value, strategy, trace, converged, note).

    Numerical failures are returned as a note so the other restarts go on.
    """
    if deadline is not None and time.monotonic() >= deadline:
        return None, None, [], False, f"seed {seed}: skipped, time budget exhausted"
    groups = list(group_split(f, cfg.group_split))
    try:
        solver = SolverFactory.create_solver(solver_settings)
        rng = as_rng(seed)
        assignment = random_assignment(f.scenario, rng, cfg.effect_kind)
        objective = Objective([(1.0, f)])
        state, _ = state_step(objective, assignment)
        if pin_functional is None:
            state, assignment, trace, converged = _iterate(
                objective, state, assignment, groups, solver, cfg, deadline=deadline
            )
        else:
            pin = Pin(pin_functional, pin_value - cfg.pin_slack, cfg.pin_slack / 2)
            state, assignment = _warm_up(f, pin, state, assignment, groups, solver, cfg, deadline)
            if not pin.met(state, assignment):
                return None, None, [], False, f"seed {seed}: pinned value {pin_value} not reached"
            state, assignment, trace, converged = _iterate(
                objective, state, assignment, groups, solver, cfg, pin, deadline=deadline
            )
        strategy = final_cleanup(Strategy(state, assignment), cfg.effect_kind)
        if pin_functional is not None:
            reached = evaluate(pin_functional, strategy)
            if reached < pin_value - cfg.pin_slack - TOLERANCES.solver_feasibility:
                return None, None, [], False, (
                    f"seed {seed}: pinned value {reached:.6f} below {pin_value} after cleanup"
                )
        return evaluate(f, strategy), strategy, trace, converged, None
    except RESTART_ERRORS as e:
        return None, None, [], False, f"seed {seed}: {type(e).__name__}: {e}"


def _run_restarts(f, cfg, solver_settings, pin=None, pin_value=None, verbose=False):
    seeds = [cfg.seed + r for r in range(cfg.restarts)]
    deadline = None if cfg.time_budget is None else time.monotonic() + cfg.time_budget
    args = [(f, cfg, solver_settings, s, pin, pin_value, deadline) for s in seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outputs = list(pool.map(run_restart, *zip(*args)))
    else:
        outputs = []
        for a in args:
            outputs.append(run_restart(*a))
            if verbose:
                console.print(f"  restart seed={a[3]} value={outputs[-1][0]}")
    return seeds, outputs


def _collect(f: BellFunctional, seeds, outputs) -> Optional[SeesawResult]:
    result = None
    values, blocks_list, notes = [], [], []
    for seed, (value, strategy, trace, converged, note) in zip(seeds, outputs):
        if note:
            notes.append(note)
        blocks = per_block_values(f, strategy) if value is not None else None
        values.append(value)
        blocks_list.append(blocks)
        # Ties keep the lowest seed.
        if value is not None and (result is None or value > result.best_value):
            result = SeesawResult(value, strategy, blocks, trace, converged, seed)
    if result is not None:
        result.restart_values = values
        result.restart_blocks = blocks_list
        result.notes = notes
    return result


def seesaw(
    scenario,
    f: BellFunctional,
    cfg: Optional[SeesawSettings] = None,
    solver_settings: Optional[SolverSettings] = None,
    verbose: bool = False,
) -> SeesawResult:
    cfg = cfg if cfg else SeesawSettings()
    solver_settings = solver_settings if solver_settings else SolverSettings()
    if f.scenario != scenario:
        raise UsageError("Functional and scenario do not match")
    seeds, outputs = _run_restarts(f, cfg, solver_settings, verbose=verbose)
    result = _collect(f, seeds, outputs)
    if result is None:
        raise SolverFailure(f"All {cfg.restarts} see-saw restarts failed")
    return result


def constrained_seesaw(
    f: BellFunctional,
    pin: BellFunctional,
    pin_value: float,
    cfg: Optional[SeesawSettings] = None,
    solver_settings: Optional[SolverSettings] = None,
    verbose: bool = False,
) -> SeesawResult:
    """Maximizes f subject to evaluate(pin) >= pin_value - cfg.pin_slack.

    Every restart first maximizes weight * pin + f, raising the weight until
    the pin holds, then keeps the pin as a constraint in each state and
    effects step. Restarts whose cleaned-up strategy misses the pin are dropped.
    """
    cfg = cfg if cfg else SeesawSettings()
    if pin.scenario != f.scenario:
        raise UsageError("Pin and objective must share one scenario")
    if not math.isfinite(pin_value):
        return seesaw(f.scenario, f, cfg, solver_settings, verbose)
    solver_settings = solver_settings if solver_settings else SolverSettings()
    seeds, outputs = _run_restarts(f, cfg, solver_settings, pin, pin_value, verbose)
    result = _collect(f, seeds, outputs)
    if result is None:
        raise InfeasiblePin(
            f"No restart reached the pinned value {pin_value}: "
            + "; ".join(output[4] for output in outputs if output[4])
        )
    return result


def sweep_is_monotone(trace: Sequence[float], tol: Optional[float] = None) -> bool:
    tol = TOLERANCES.sweep_monotonicity if tol is None else tol
    return all(b >= a - tol for a, b in zip(trace, trace[1:]))
