import cvxpy as cp

from typing import Any, Dict

from bellbound.solvers.base import BaseSolver


# First-order fallback; it rarely reaches 1e-8, so results usually come back near-optimal.
class ScsSolver(BaseSolver):
    name = "scs"

    def solver_name(self) -> str:
        return cp.SCS

    def solver_options(self, tol: float) -> Dict[str, Any]:
        return {
            "eps_abs": tol,
            "eps_rel": tol,
            "max_iters": 100 * self.settings.max_iter,
        }
