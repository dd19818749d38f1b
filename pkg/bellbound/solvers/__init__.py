from typing import Optional, Union

from bellbound.loader.models import SolverSettings, SolverType
from bellbound.solvers.base import (
    BaseSolver,
    ConicProblem,
    LinearConstraint,
    SdpSolution,
    Sense,
    SolutionStatus,
    embed_complex,
    extract_complex,
    hermitian_basis,
)
from bellbound.solvers.clarabel import ClarabelSolver
from bellbound.solvers.scs import ScsSolver


SOLVER_TYPE_MAP = {
    SolverType.clarabel: ClarabelSolver,
    SolverType.scs: ScsSolver,
}

SolverBackend = Union[BaseSolver, ClarabelSolver, ScsSolver]

# The fallback never runs tighter than this.
FALLBACK_TOL = 1e-6


class SolverFactory:
    @staticmethod
    def create_solver(settings: Optional[SolverSettings] = None) -> SolverBackend:
        settings = settings if settings else SolverSettings()
        fallback = None
        if settings.fallback and settings.fallback != settings.type:
            fallback_settings = settings.model_copy(
                update={
                    "type": settings.fallback,
                    "fallback": None,
                    "tol": max(settings.tol, FALLBACK_TOL),
                }
            )
            fallback = SOLVER_TYPE_MAP.get(settings.fallback, ScsSolver)(fallback_settings)
        return SOLVER_TYPE_MAP.get(settings.type, ClarabelSolver)(settings, fallback)


__all__ = [
    "ClarabelSolver",
    "ConicProblem",
    "LinearConstraint",
    "ScsSolver",
    "SdpSolution",
    "Sense",
    "SolutionStatus",
    "SolverFactory",
    "embed_complex",
    "extract_complex",
    "hermitian_basis",
]
