import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from src.deepc.hankel import build_hankel, hankel_rank
from src.deepc.qp import solve_qp
from src.deepc.views import DeepcParams, QProblem, SolveStatus
from src.utils.errors import SolverError

logger = logging.getLogger(__name__)


@dataclass
class LtiOracle:
    """x+ = A x + B u + B_d w,  y = C x + D u + D_d w.

    Validation-only plant used to check the data-driven controller against a model.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    B_d: np.ndarray
    D_d: np.ndarray
    x: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.x is None:
            self.x = np.zeros(self.n)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def q(self) -> int:
        return self.B_d.shape[1]

    @classmethod
    def random(
        cls,
        n: int,
        m: int,
        p: int,
        q: int,
        rng: np.random.Generator,
        spectral_radius: float = 0.8,
        positive: bool = False,
    ) -> "LtiOracle":
        """Random stable system; ``positive`` draws all matrices elementwise nonnegative."""
        draw = (lambda *shape: rng.uniform(0.0, 1.0, size=shape)) if positive else (lambda *shape: rng.normal(size=shape))
        A = draw(n, n)
        A *= spectral_radius / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
        return cls(
            A=A,
            B=draw(n, m),
            C=draw(p, n),
            D=draw(p, m) * 0.1,
            B_d=draw(n, q),
            D_d=draw(p, q) * 0.1,
        )

    def reset(self, x0: Optional[np.ndarray] = None) -> None:
        self.x = np.zeros(self.n) if x0 is None else np.asarray(x0, dtype=float).copy()

    def step(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        y = self.C @ self.x + self.D @ u + self.D_d @ w
        self.x = self.A @ self.x + self.B @ u + self.B_d @ w
        return y

    def simulate(self, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.array([self.step(u_t, w_t) for u_t, w_t in zip(u, w)])

    def response_matrices(self, T: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stacked outputs over T steps: y = O x0 + T_u u + T_w w."""
        n, m, p, q = self.n, self.m, self.p, self.q
        powers = [np.eye(n)]
        for _ in range(T):
            powers.append(self.A @ powers[-1])
        O = np.vstack([self.C @ powers[t] for t in range(T)])
        T_u = np.zeros((p * T, m * T))
        T_w = np.zeros((p * T, q * T))
        for t in range(T):
            T_u[p * t : p * (t + 1), m * t : m * (t + 1)] = self.D
            T_w[p * t : p * (t + 1), q * t : q * (t + 1)] = self.D_d
            for s in range(t):
                CA = self.C @ powers[t - 1 - s]
                T_u[p * t : p * (t + 1), m * s : m * (s + 1)] = CA @ self.B
                T_w[p * t : p * (t + 1), q * s : q * (s + 1)] = CA @ self.B_d
        return O, T_u, T_w

    def transition_matrices(self, T: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """State after T steps: x_T = A^T x0 + S_u u + S_w w."""
        n = self.n
        A_T = np.linalg.matrix_power(self.A, T)
        S_u = np.hstack([np.linalg.matrix_power(self.A, T - 1 - s) @ self.B for s in range(T)]) if T else np.zeros((n, 0))
        S_w = np.hstack([np.linalg.matrix_power(self.A, T - 1 - s) @ self.B_d for s in range(T)]) if T else np.zeros((n, 0))
        return A_T, S_u, S_w


def verify_fundamental_lemma(
    oracle: LtiOracle,
    collected: tuple[np.ndarray, np.ndarray, np.ndarray],
    test_trajectory: tuple[np.ndarray, np.ndarray, np.ndarray],
) -> float:
    """Residual of the least-squares representation of a trajectory by the data Hankel matrices."""
    u_d, w_d, y_d = (np.asarray(s, dtype=float) for s in collected)
    u_t, w_t, y_t = (np.asarray(s, dtype=float) for s in test_trajectory)
    L = u_t.shape[0]

    order = L + oracle.n
    stacked = np.hstack([u_d, w_d])
    if u_d.shape[0] - order + 1 >= stacked.shape[1] * order:
        if hankel_rank(build_hankel(stacked, order)) < stacked.shape[1] * order:
            logger.warning(f"⚠️ Collected data not persistently exciting of order {order}")

    H = np.vstack([build_hankel(u_d, L), build_hankel(w_d, L), build_hankel(y_d, L)])
    target = np.concatenate([u_t.ravel(), w_t.ravel(), y_t.ravel()])
    g, *_ = linalg.lstsq(H, target)
    return float(np.linalg.norm(H @ g - target))


def mpc_oracle_problem(
    oracle: LtiOracle,
    u_ini: np.ndarray,
    w_ini: np.ndarray,
    y_ini: np.ndarray,
    w_future: np.ndarray,
    e: np.ndarray,
    params: DeepcParams,
) -> QProblem:
    """Model-based counterpart of the condensed data-driven problem.

    Decision ``[xi, u_f]`` where xi is the state T_ini steps ago; the past-output slack
    and all stage costs and constraints match the data-driven formulation.
    """
    n, m, p, q = oracle.n, oracle.m, oracle.p, oracle.q
    T_ini, N = params.T_ini, params.N
    R = p
    Q = np.asarray(params.Q, dtype=float)
    Rw = np.asarray(params.Rw, dtype=float)

    O_p, Tu_p, Tw_p = oracle.response_matrices(T_ini)
    A_T, S_u, S_w = oracle.transition_matrices(T_ini)
    O_f, Tu_f, Tw_f = oracle.response_matrices(N)

    r_p = y_ini - Tu_p @ u_ini - Tw_p @ w_ini
    M_xi = O_f @ A_T
    r_f = O_f @ (S_u @ u_ini + S_w @ w_ini) + Tw_f @ w_future

    dim = n + m * N
    P = np.zeros((dim, dim))
    P[:n, :n] = 2.0 * params.lambda_y * (O_p.T @ O_p)
    Qt = np.tile(Q, N)
    c = np.concatenate([
        -params.alpha * (M_xi.T @ Qt) - 2.0 * params.lambda_y * (O_p.T @ r_p),
        -params.alpha * (Tu_f.T @ Qt) + np.tile(Rw, N),
    ])

    A_eq = np.zeros((R, dim))
    for I in range(R):
        A_eq[I, n + I * R : n + (I + 1) * R] = 1.0
    b_eq = np.asarray(e, dtype=float)

    G = np.vstack([
        np.hstack([np.zeros((m * N, n)), -np.eye(m * N)]),
        -np.hstack([M_xi, Tu_f]),
    ])
    h = np.concatenate([np.zeros(m * N), r_f])
    return QProblem(
        P=P,
        c=c,
        A_eq=A_eq,
        b_eq=b_eq,
        G=G,
        h=h,
        constant=float(params.lambda_y * r_p @ r_p - params.alpha * Qt @ r_f),
    )


def mpc_oracle_step(
    oracle: LtiOracle,
    u_ini: np.ndarray,
    w_ini: np.ndarray,
    y_ini: np.ndarray,
    w_future: np.ndarray,
    e: np.ndarray,
    params: DeepcParams,
) -> np.ndarray:
    """First-step input of the model-based problem."""
    problem = mpc_oracle_problem(oracle, u_ini, w_ini, y_ini, w_future, e, params)
    solution = solve_qp(problem, tol=params.tol, max_iter=params.max_iter)
    if solution.status != SolveStatus.OPTIMAL:
        raise SolverError(f"Model-based problem returned {solution.status.value}")
    return solution.x[oracle.n : oracle.n + oracle.m]
