import cvxpy as cp

from typing import Any, Dict

from bellbound.solvers.base import BaseSolver


class ClarabelSolver(BaseSolver):
    name = "clarabel"

    def solver_name(self) -> str:
        return cp.CLARABEL

    def solver_options(self, tol: float) -> Dict[str, Any]:
        return {
            "tol_gap_abs": tol,
            "tol_gap_rel": tol,
            "tol_feas": tol,
            "max_iter": self.settings.max_iter,
        }
