import numpy as np
import pytest

from bellbound.loader.models import SolverSettings
from bellbound.solvers import (
    ConicProblem,
    LinearConstraint,
    SdpSolution,
    Sense,
    SolutionStatus,
    SolverFactory,
    embed_complex,
    extract_complex,
    hermitian_basis,
)
from bellbound.solvers.clarabel import ClarabelSolver
from bellbound.solvers.scs import ScsSolver


def density_problem(w: np.ndarray) -> ConicProblem:
    n = w.shape[0]
    return ConicProblem(
        anchors=[np.zeros((n, n), dtype=complex)],
        basis=[[h] for h in hermitian_basis(n)],
        objective=[w],
        extra_linear=[LinearConstraint([np.eye(n)], 1.0, Sense.eq)],
    )


def test_factory_picks_backend():
    assert isinstance(SolverFactory.create_solver(SolverSettings(type="clarabel")), ClarabelSolver)
    assert isinstance(SolverFactory.create_solver(SolverSettings(type="scs")), ScsSolver)


def test_solver_settings_from_env(monkeypatch):
    monkeypatch.setenv("BELLBOUND_SOLVER", "scs")
    monkeypatch.setenv("BELLBOUND_SOLVER_TOL", "1e-6")
    settings = SolverSettings()
    assert settings.type == "scs"
    assert settings.tol == 1e-6


def test_hermitian_basis_size():
    basis = hermitian_basis(3)
    assert len(basis) == 9
    assert all(np.allclose(b, b.conj().T) for b in basis)


def test_real_embedding_preserves_spectrum():
    h = np.array([[1.0, 2 - 1j], [2 + 1j, -0.5]])
    z = embed_complex(h)
    assert np.allclose(z, z.T)
    values = np.sort(np.linalg.eigvalsh(z))
    expected = np.sort(np.repeat(np.linalg.eigvalsh(h), 2))
    assert np.allclose(values, expected)
    assert np.allclose(extract_complex(z), h)


def test_max_eigenvalue_by_sdp():
    w = np.array([[1.0, 1j], [-1j, 1.0]])
    solution = SolverFactory.create_solver(SolverSettings(type="clarabel")).solve(density_problem(w))
    assert solution.status in (SolutionStatus.optimal, SolutionStatus.near_optimal)
    assert abs(solution.value - 2.0) < 1e-6
    rho = solution.variable[0]
    assert abs(np.trace(rho).real - 1) < 1e-6


def test_scs_backend_agrees():
    w = np.diag([1.0, 3.0, 2.0]).astype(complex)
    solution = SolverFactory.create_solver(SolverSettings(type="scs", tol=1e-7)).solve(
        density_problem(w)
    )
    assert solution.usable
    assert abs(solution.value - 3.0) < 1e-3


def test_infeasible_problem():
    problem = density_problem(np.eye(2, dtype=complex))
    problem.extra_linear.append(LinearConstraint([np.eye(2)], 2.0, Sense.ge))
    solution = SolverFactory.create_solver(SolverSettings(type="clarabel")).solve(problem)
    assert solution.status == SolutionStatus.infeasible
    assert not solution.usable


def test_failed_backend_falls_back(monkeypatch):
    monkeypatch.setattr(
        ClarabelSolver,
        "solve_once",
        lambda self, problem, tol=None: SdpSolution(SolutionStatus.failed, backend=self.name),
    )
    w = np.array([[1.0, 1j], [-1j, 1.0]])
    solution = SolverFactory.create_solver(SolverSettings(type="clarabel", fallback="scs")).solve(
        density_problem(w)
    )
    assert solution.usable
    assert solution.backend == "scs"
    assert abs(solution.value - 2.0) < 1e-3
    alone = SolverFactory.create_solver(SolverSettings(type="clarabel", fallback=None))
    assert alone.fallback is None
    failed = alone.solve(density_problem(w))
    assert failed.status == SolutionStatus.failed
    assert failed.backend == "clarabel"


def test_backend_is_recorded():
    w = np.diag([1.0, 2.0]).astype(complex)
    solution = SolverFactory.create_solver(SolverSettings(type="clarabel")).solve(density_problem(w))
    assert solution.backend == "clarabel"
