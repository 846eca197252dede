import sys

sys.path.append(".")

import itertools

import numpy as np
import pytest

from src.deepc.qp import kkt_residuals, objective_value, solve_qp
from src.deepc.views import QProblem, SolveStatus
from src.utils.errors import DimensionMismatchError


def _empty(n: int):
    return np.zeros((0, n)), np.zeros(0)


def _random_qp(rng: np.random.Generator, n: int, n_eq: int, n_in: int) -> QProblem:
    M = rng.normal(size=(n, n))
    P = M.T @ M + 0.5 * np.eye(n)
    x0 = rng.normal(size=n)
    A_eq = rng.normal(size=(n_eq, n))
    G = rng.normal(size=(n_in, n))
    return QProblem(
        P=P,
        c=rng.normal(size=n) * 3.0,
        A_eq=A_eq,
        b_eq=A_eq @ x0,
        G=G,
        h=G @ x0 + rng.uniform(0.0, 1.0, size=n_in),
    )


def active_set_oracle(problem: QProblem) -> float:
    """Minimum objective over all active sets whose KKT point is primal and dual feasible."""
    n = problem.dim
    n_eq = problem.A_eq.shape[0]
    best = np.inf
    for size in range(problem.G.shape[0] + 1):
        for active in itertools.combinations(range(problem.G.shape[0]), size):
            A = np.vstack([problem.A_eq, problem.G[list(active)]])
            b = np.concatenate([problem.b_eq, problem.h[list(active)]])
            if A.shape[0] > n or (A.shape[0] and np.linalg.matrix_rank(A) < A.shape[0]):
                continue
            k = A.shape[0]
            kkt = np.block([[problem.P, A.T], [A, np.zeros((k, k))]])
            solution = np.linalg.solve(kkt, np.concatenate([-problem.c, b]))
            x, multipliers = solution[:n], solution[n:]
            if np.any(problem.G @ x - problem.h > 1e-9):
                continue
            if np.any(multipliers[n_eq:] < -1e-9):
                continue
            best = min(best, objective_value(problem, x))
    return best


def test_single_bound():
    A_eq, b_eq = _empty(1)
    problem = QProblem(P=np.array([[2.0]]), c=np.zeros(1), A_eq=A_eq, b_eq=b_eq, G=np.array([[-1.0]]), h=np.array([-1.0]))
    solution = solve_qp(problem)
    assert solution.status == SolveStatus.OPTIMAL
    assert solution.x[0] == pytest.approx(1.0, abs=1e-6)
    assert solution.objective == pytest.approx(1.0, abs=1e-6)


def test_projected_quadratic():
    # (x - 3)^2 + (y + 1)^2 with x + y = 1 and y >= 0
    problem = QProblem(
        P=2.0 * np.eye(2),
        c=np.array([-6.0, 2.0]),
        A_eq=np.array([[1.0, 1.0]]),
        b_eq=np.array([1.0]),
        G=np.array([[0.0, -1.0]]),
        h=np.array([0.0]),
        constant=10.0,
    )
    solution = solve_qp(problem)
    assert solution.status == SolveStatus.OPTIMAL
    np.testing.assert_allclose(solution.x, [1.0, 0.0], atol=1e-6)
    assert solution.objective == pytest.approx(5.0, abs=1e-6)
    assert active_set_oracle(problem) == pytest.approx(5.0)


def test_inconsistent_equalities_are_infeasible():
    G, h = _empty(1)
    problem = QProblem(
        P=np.array([[2.0]]), c=np.zeros(1), A_eq=np.array([[1.0], [1.0]]), b_eq=np.array([0.0, 1.0]), G=G, h=h
    )
    assert solve_qp(problem).status == SolveStatus.INFEASIBLE


def test_dimension_checks():
    A_eq, b_eq = _empty(2)
    with pytest.raises(DimensionMismatchError):
        solve_qp(QProblem(P=np.eye(3), c=np.zeros(2), A_eq=A_eq, b_eq=b_eq, G=np.zeros((1, 2)), h=np.zeros(1)))


def test_random_qps_satisfy_kkt():
    rng = np.random.default_rng(0)
    for trial in range(100):
        n = int(rng.integers(2, 51))
        problem = _random_qp(rng, n, n_eq=int(rng.integers(0, n // 2 + 1)), n_in=int(rng.integers(1, n + 1)))
        solution = solve_qp(problem, tol=1e-6)
        assert solution.status == SolveStatus.OPTIMAL, f"trial {trial}: {solution.status}"
        assert solution.max_residual <= 1e-6
        assert solution.iterations > 0


def test_small_qps_match_active_set_enumeration():
    rng = np.random.default_rng(1)
    for trial in range(40):
        n = int(rng.integers(1, 9))
        problem = _random_qp(rng, n, n_eq=int(rng.integers(0, n)), n_in=int(rng.integers(1, 7)))
        expected = active_set_oracle(problem)
        solution = solve_qp(problem, tol=1e-6)
        assert solution.status == SolveStatus.OPTIMAL
        assert abs(solution.objective - expected) <= 1e-6 * max(1.0, abs(expected)), f"trial {trial}"


def test_kkt_residuals_flag_wrong_point():
    problem = QProblem(
        P=2.0 * np.eye(2),
        c=np.array([-6.0, 2.0]),
        A_eq=np.array([[1.0, 1.0]]),
        b_eq=np.array([1.0]),
        G=np.array([[0.0, -1.0]]),
        h=np.array([0.0]),
    )
    # optimum (1, 0) with multipliers y_eq = 4, y_in = 6
    exact = kkt_residuals(problem, np.array([1.0, 0.0]), np.array([4.0]), np.array([6.0]))
    assert max(exact) <= 1e-12
    wrong = kkt_residuals(problem, np.array([3.0, -1.0]), np.array([0.0]), np.array([0.0]))
    assert wrong[0] > 0.1 and wrong[1] > 0.1
