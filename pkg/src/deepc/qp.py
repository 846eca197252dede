import logging

import numpy as np
import osqp
from scipy import sparse

from src.deepc.views import QProblem, QSolution, SolveStatus
from src.utils.errors import DimensionMismatchError

logger = logging.getLogger(__name__)

_INFEASIBLE = {"primal infeasible", "primal infeasible inaccurate"}


def check_problem(problem: QProblem) -> None:
    n = problem.dim
    if problem.P.shape != (n, n):
        raise DimensionMismatchError(f"P is {problem.P.shape}, expected ({n}, {n})")
    if problem.A_eq.shape[1:] != (n,) or problem.A_eq.shape[0] != problem.b_eq.shape[0]:
        raise DimensionMismatchError(f"A_eq {problem.A_eq.shape} does not match b_eq {problem.b_eq.shape} and dim {n}")
    if problem.G.shape[1:] != (n,) or problem.G.shape[0] != problem.h.shape[0]:
        raise DimensionMismatchError(f"G {problem.G.shape} does not match h {problem.h.shape} and dim {n}")


def objective_value(problem: QProblem, x: np.ndarray) -> float:
    return float(0.5 * x @ problem.P @ x + problem.c @ x + problem.constant)


def kkt_residuals(problem: QProblem, x: np.ndarray, y_eq: np.ndarray, y_in: np.ndarray) -> tuple[float, float, float, float]:
    """Relative KKT residuals of (x, y).

    Each residual is divided by one plus the largest magnitude among the terms it balances.
    ``y_in`` are the multipliers of ``G x <= h`` and should be nonnegative.
    """

    def inf_norm(v: np.ndarray) -> float:
        return float(np.max(np.abs(v))) if v.size else 0.0

    Ax = problem.A_eq @ x
    equality = inf_norm(Ax - problem.b_eq) / (1.0 + max(inf_norm(Ax), inf_norm(problem.b_eq)))

    Gx = problem.G @ x
    slack = Gx - problem.h
    inequality = inf_norm(np.maximum(slack, 0.0)) / (1.0 + max(inf_norm(Gx), inf_norm(problem.h)))

    Px = problem.P @ x
    At_y = problem.A_eq.T @ y_eq + problem.G.T @ y_in
    stationarity = inf_norm(Px + problem.c + At_y) / (
        1.0 + max(inf_norm(Px), inf_norm(problem.c), inf_norm(At_y))
    )

    y_plus = np.maximum(y_in, 0.0)
    scale = 1.0 + max(inf_norm(y_in), inf_norm(Gx), inf_norm(problem.h))
    complementarity = max(inf_norm(y_plus * slack), inf_norm(np.minimum(y_in, 0.0))) / scale
    return equality, inequality, stationarity, complementarity


def solve_qp(problem: QProblem, tol: float = 1e-6, max_iter: int = 20000) -> QSolution:
    """Solve a convex QP with OSQP and certify the result with its own KKT residuals.

    A run OSQP reports as solved is accepted only when every relative residual is at
    most ``tol``; otherwise it is retried once at tighter accuracy and reported as
    ``max_iter`` with the best iterate if that still falls short.
    """
    check_problem(problem)
    n = problem.dim
    n_eq = problem.A_eq.shape[0]

    P = sparse.triu(sparse.csc_matrix(problem.P), format="csc")
    A = sparse.vstack([sparse.csc_matrix(problem.A_eq), sparse.csc_matrix(problem.G)], format="csc")
    lower = np.concatenate([problem.b_eq, np.full(problem.G.shape[0], -np.inf)])
    upper = np.concatenate([problem.b_eq, problem.h])

    best = None
    iterations = 0
    for eps in (max(tol, 1e-6), min(tol, 1e-6) * 1e-2):
        solver = osqp.OSQP()
        solver.setup(
            P,
            problem.c.astype(float),
            A,
            lower,
            upper,
            verbose=False,
            eps_abs=eps,
            eps_rel=eps,
            eps_prim_inf=1e-7,
            eps_dual_inf=1e-7,
            max_iter=max_iter,
            polish=True,
            polish_refine_iter=10,
            adaptive_rho=True,
            scaling=10,
        )
        result = solver.solve()
        status = result.info.status
        iterations += int(result.info.iter)

        if status in _INFEASIBLE:
            logger.debug(f"OSQP reports {status} after {iterations} iterations")
            return QSolution(
                x=np.zeros(n),
                status=SolveStatus.INFEASIBLE,
                objective=float("inf"),
                iterations=iterations,
                equality_residual=float("inf"),
                inequality_residual=float("inf"),
                stationarity_residual=float("inf"),
                complementarity_residual=float("inf"),
            )

        if result.x is None or result.y is None or status.startswith("dual infeasible"):
            continue
        x = np.asarray(result.x, dtype=float)
        y = np.asarray(result.y, dtype=float)
        if x.shape != (n,) or not np.all(np.isfinite(x)):
            continue
        residuals = kkt_residuals(problem, x, y[:n_eq], y[n_eq:])
        candidate = (max(residuals), x, residuals)
        if best is None or candidate[0] < best[0]:
            best = candidate
        if status == "solved" and max(residuals) <= tol:
            break

    if best is None:
        return QSolution(
            x=np.zeros(n),
            status=SolveStatus.MAX_ITER,
            objective=float("nan"),
            iterations=iterations,
            equality_residual=float("inf"),
            inequality_residual=float("inf"),
            stationarity_residual=float("inf"),
            complementarity_residual=float("inf"),
        )

    worst, x, (equality, inequality, stationarity, complementarity) = best
    return QSolution(
        x=x,
        status=SolveStatus.OPTIMAL if worst <= tol else SolveStatus.MAX_ITER,
        objective=objective_value(problem, x),
        iterations=iterations,
        equality_residual=equality,
        inequality_residual=inequality,
        stationarity_residual=stationarity,
        complementarity_residual=complementarity,
    )
