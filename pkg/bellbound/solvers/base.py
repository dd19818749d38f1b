import cvxpy as cp
import numpy as np

from dataclasses import dataclass, field
from enum import Enum
from rich.console import Console
from scipy import linalg
from typing import Any, Dict, List, Optional

from bellbound.loader.models import TOLERANCES, SolverSettings


console = Console()


class SolutionStatus(str, Enum):
    optimal = "optimal"
    near_optimal = "near-optimal"
    infeasible = "infeasible"
    failed = "failed"


class Sense(str, Enum):
    ge = "ge"
    le = "le"
    eq = "eq"


@dataclass
class LinearConstraint:
    # One Hermitian matrix per PSD block; the functional is sum_j Re tr(W_j X_j).
    functional: List[np.ndarray]
    bound: float
    sense: Sense = Sense.ge


@dataclass
class ConicProblem:
    """Maximize sum_j Re tr(W_j X_j) over X_j = anchor_j + sum_i c_i B_ij, all X_j PSD.

    ``basis[i][j]`` is the contribution of real coefficient i to block j.
    """

    anchors: List[np.ndarray]
    basis: List[List[np.ndarray]]
    objective: List[np.ndarray]
    extra_linear: List[LinearConstraint] = field(default_factory=list)

    def linear_form(self, functional: List[np.ndarray]):
        """Coefficient vector and constant of a block functional in terms of c."""
        constant = sum(_inner(w, a) for w, a in zip(functional, self.anchors))
        vector = np.array(
            [sum(_inner(w, b) for w, b in zip(functional, row)) for row in self.basis]
        )
        return vector, float(constant)

    def blocks_at(self, coefficients: np.ndarray) -> List[np.ndarray]:
        blocks = [a.astype(complex) for a in self.anchors]
        for c, row in zip(coefficients, self.basis):
            for j, b in enumerate(row):
                blocks[j] = blocks[j] + c * b
        return blocks


@dataclass
class SdpSolution:
    status: SolutionStatus
    value: Optional[float] = None
    variable: List[np.ndarray] = field(default_factory=list)
    coefficients: Optional[np.ndarray] = None
    solver_residuals: Dict[str, float] = field(default_factory=dict)
    backend: Optional[str] = None

    @property
    def usable(self) -> bool:
        return self.status in (SolutionStatus.optimal, SolutionStatus.near_optimal)


def _inner(w: np.ndarray, x: np.ndarray) -> float:
    return float(np.real(np.vdot(w, x)))


def embed_complex(h: np.ndarray) -> np.ndarray:
    """Real symmetric [[Re, -Im], [Im, Re]] embedding of a Hermitian matrix."""
    re, im = np.real(h), np.imag(h)
    return np.block([[re, -im], [im, re]])


def extract_complex(z: np.ndarray) -> np.ndarray:
    n = z.shape[0] // 2
    re = (z[:n, :n] + z[n:, n:]) / 2
    im = (z[n:, :n] - z[:n, n:]) / 2
    return re + 1j * im


def hermitian_basis(n: int) -> List[np.ndarray]:
    """Real basis of the n x n Hermitian matrices, n^2 elements."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1
            basis.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j], e[j, i] = -1j, 1j
            basis.append(e)
    return basis


class BaseSolver:
    name = "base"

    def __init__(
        self, settings: Optional[SolverSettings] = None, fallback: Optional["BaseSolver"] = None
    ) -> None:
        self.settings = settings if settings else SolverSettings()
        self.fallback = fallback

    def solver_options(self, tol: float) -> Dict[str, Any]:
        raise Exception("Solver options Method Not Implemented Yet")

    def solver_name(self) -> str:
        raise Exception("Solver name Method Not Implemented Yet")

    def solve(self, problem: ConicProblem, tol: Optional[float] = None) -> SdpSolution:
        """Solves with this backend, then with the fallback if this one fails outright."""
        solution = self.solve_once(problem, tol)
        if solution.status == SolutionStatus.failed and self.fallback is not None:
            if self.settings.verbose:
                console.print(f"[yellow]Retrying with {self.fallback.name}[/yellow]")
            solution = self.fallback.solve(problem)
        return solution

    def solve_once(self, problem: ConicProblem, tol: Optional[float] = None) -> SdpSolution:
        tol = self.settings.tol if tol is None else tol
        k = len(problem.basis)
        c = cp.Variable(k) if k else None
        constraints = []
        for j, anchor in enumerate(problem.anchors):
            n = anchor.shape[0]
            z = cp.Variable((2 * n, 2 * n), PSD=True)
            anchor_real = embed_complex(anchor)
            if k:
                columns = np.column_stack(
                    [embed_complex(row[j]).ravel(order="F") for row in problem.basis]
                )
                constraints.append(
                    z == anchor_real + cp.reshape(columns @ c, (2 * n, 2 * n), order="F")
                )
            else:
                constraints.append(z == anchor_real)
        objective_vector, objective_constant = problem.linear_form(problem.objective)
        for constraint in problem.extra_linear:
            vector, constant = problem.linear_form(constraint.functional)
            expr = (vector @ c if k else 0) + constant
            if constraint.sense == Sense.ge:
                constraints.append(expr >= constraint.bound)
            elif constraint.sense == Sense.le:
                constraints.append(expr <= constraint.bound)
            else:
                constraints.append(expr == constraint.bound)
        goal = (objective_vector @ c if k else 0) + objective_constant
        program = cp.Problem(cp.Maximize(goal), constraints)
        try:
            program.solve(
                solver=self.solver_name(),
                verbose=self.settings.verbose,
                **self.solver_options(tol),
            )
        except (cp.SolverError, ValueError, ArithmeticError) as e:
            if self.settings.verbose:
                console.print(f"[red]Solver {self.name} failed:[/red] {e}")
            return SdpSolution(
                SolutionStatus.failed, solver_residuals={"error": float("nan")}, backend=self.name
            )
        solution = self.read_solution(problem, program, c, objective_vector, objective_constant)
        solution.backend = self.name
        return solution

    def read_solution(self, problem, program, c, objective_vector, objective_constant):
        status = program.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return SdpSolution(SolutionStatus.infeasible)
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return SdpSolution(SolutionStatus.failed, solver_residuals={"status": float("nan")})
        coefficients = (
            np.asarray(c.value, dtype=float) if c is not None else np.zeros(0)
        )
        blocks = problem.blocks_at(coefficients)
        residuals = {
            "psd": max(
                (max(0.0, -float(linalg.eigvalsh(b)[0])) for b in blocks), default=0.0
            )
        }
        linear = 0.0
        for constraint in problem.extra_linear:
            vector, constant = problem.linear_form(constraint.functional)
            value = float(vector @ coefficients) + constant
            gap = value - constraint.bound
            if constraint.sense == Sense.ge:
                linear = max(linear, -gap)
            elif constraint.sense == Sense.le:
                linear = max(linear, gap)
            else:
                linear = max(linear, abs(gap))
        residuals["linear"] = linear
        solution_status = SolutionStatus.optimal
        worst = max(residuals.values())
        if status == cp.OPTIMAL_INACCURATE or worst > TOLERANCES.solver_feasibility:
            solution_status = SolutionStatus.near_optimal
        value = float(objective_vector @ coefficients) + objective_constant
        return SdpSolution(
            status=solution_status,
            value=value,
            variable=blocks,
            coefficients=coefficients,
            solver_residuals=residuals,
        )
