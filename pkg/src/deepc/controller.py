import logging
from collections import deque
from typing import Optional

import numpy as np

from src.deepc.qp import solve_qp
from src.deepc.views import ControlCommand, DeepcParams, HankelSet, QProblem, QSolution, SolveStatus
from src.utils.errors import CommandConservationError, DimensionMismatchError, SolverError

logger = logging.getLogger(__name__)


def _check_length(name: str, vector: np.ndarray, expected: int) -> np.ndarray:
    vector = np.asarray(vector, dtype=float).ravel()
    if vector.shape[0] != expected:
        raise DimensionMismatchError(f"{name} has length {vector.shape[0]}, expected {expected}")
    return vector


def formulate_deepc_qp(
    hankels: HankelSet,
    u_ini: np.ndarray,
    w_ini: np.ndarray,
    y_ini: np.ndarray,
    w_future: np.ndarray,
    e: np.ndarray,
    params: DeepcParams,
) -> QProblem:
    """Condensed receding-horizon problem in the Hankel coefficients g.

    Inputs and outputs are affine in g (u = U_f g, y = Y_f g); under u, y >= 0 the
    L1 stage costs are inner products, so only the regularizers are quadratic.
    """
    m, q, p, T_ini, N = hankels.m, hankels.q, hankels.p, hankels.T_ini, hankels.N
    R = p
    if m != R * R or q != 2 * R:
        raise DimensionMismatchError(f"Hankel dims m={m}, q={q}, p={p} do not describe {R} regions")
    u_ini = _check_length("u_ini", u_ini, m * T_ini)
    w_ini = _check_length("w_ini", w_ini, q * T_ini)
    y_ini = _check_length("y_ini", y_ini, p * T_ini)
    w_future = _check_length("w_future", w_future, q * N)
    e = _check_length("e", e, R)
    Q = _check_length("Q", params.Q if params.Q is not None else np.zeros(p), p)
    Rw = _check_length("Rw", params.Rw if params.Rw is not None else np.zeros(m), m)

    n_g = hankels.columns
    Y_p = hankels.Y_p

    P = 2.0 * params.lambda_g * np.eye(n_g) + 2.0 * params.lambda_y * (Y_p.T @ Y_p)
    P = 0.5 * (P + P.T)
    c = (
        -params.alpha * (np.tile(Q, N) @ hankels.Y_f)
        + np.tile(Rw, N) @ hankels.U_f
        - 2.0 * params.lambda_y * (Y_p.T @ y_ini)
    )

    # first horizon step only: sum_J u^{IJ} = e^I
    first_step = hankels.U_f[:m].reshape(R, R, n_g).sum(axis=1)
    A_eq = np.vstack([hankels.U_p, hankels.W_p, hankels.W_f, first_step])
    b_eq = np.concatenate([u_ini, w_ini, w_future, e])

    G = -np.vstack([hankels.U_f, hankels.Y_f])
    h = np.zeros(G.shape[0])

    return QProblem(
        P=P,
        c=c,
        A_eq=A_eq,
        b_eq=b_eq,
        G=G,
        h=h,
        constant=float(params.lambda_y * y_ini @ y_ini),
    )


def transfer_ratios(u_float: np.ndarray) -> np.ndarray:
    """Row-normalized transfer matrix; an all-zero row keeps its vehicles in place."""
    row_sums = u_float.sum(axis=1, keepdims=True)
    theta = np.divide(u_float, row_sums, out=np.zeros_like(u_float), where=row_sums > 0)
    empty_rows = row_sums[:, 0] <= 0
    theta[empty_rows] = np.eye(u_float.shape[0])[empty_rows]
    return theta


def integer_command(u_float: np.ndarray, e: np.ndarray) -> np.ndarray:
    R = u_float.shape[0]
    e = np.asarray(e).astype(int)
    u_int = np.floor(u_float).astype(int)
    np.fill_diagonal(u_int, 0)
    stay = e - u_int.sum(axis=1)
    if np.any(stay < 0):
        raise CommandConservationError(f"Command moves more vehicles than available: e={e.tolist()}, moves={u_int.sum(axis=1).tolist()}")
    u_int[np.arange(R), np.arange(R)] = stay
    return u_int


def extract_command(
    solution: QSolution,
    hankels: HankelSet,
    e: np.ndarray,
    relaxed_tol: float = 1e-3,
) -> ControlCommand:
    if solution.status != SolveStatus.OPTIMAL:
        if solution.status == SolveStatus.MAX_ITER and solution.max_residual <= relaxed_tol:
            logger.warning(f"⚠️ Accepting inexact solution, max residual {solution.max_residual:.2e}")
        else:
            raise SolverError(f"Cannot extract a command from a {solution.status.value} solution")
    R = hankels.p
    u_float = np.maximum(hankels.U_f[: hankels.m] @ solution.x, 0.0).reshape(R, R)
    return ControlCommand(u_float=u_float, u_int=integer_command(u_float, e), theta=transfer_ratios(u_float))


class DeepcController:
    """Receding-horizon inter-regional transfer controller.

    Holds the rolling windows of the last ``T_ini`` inputs, disturbances and outputs;
    ``observe`` feeds back a finished window and ``step`` issues the next command.
    """

    def __init__(
        self,
        hankels: HankelSet,
        params: DeepcParams,
        u_tail: np.ndarray,
        w_tail: np.ndarray,
        y_tail: np.ndarray,
    ):
        self.hankels = hankels
        self.params = params
        T_ini = hankels.T_ini
        if len(u_tail) < T_ini or len(w_tail) < T_ini or len(y_tail) < T_ini:
            raise DimensionMismatchError(f"Need at least {T_ini} samples to seed the controller windows")
        self.u_buffer: deque = deque((np.asarray(v, dtype=float) for v in u_tail[-T_ini:]), maxlen=T_ini)
        self.w_buffer: deque = deque((np.asarray(v, dtype=float) for v in w_tail[-T_ini:]), maxlen=T_ini)
        self.y_buffer: deque = deque((np.asarray(v, dtype=float) for v in y_tail[-T_ini:]), maxlen=T_ini)
        self.n_steps = 0
        self.n_fallbacks = 0
        self.last_solution: Optional[QSolution] = None

    def observe(self, w: np.ndarray, y: np.ndarray) -> None:
        self.w_buffer.append(np.asarray(w, dtype=float).ravel())
        self.y_buffer.append(np.asarray(y, dtype=float).ravel())

    def initial_windows(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.concatenate(list(self.u_buffer)),
            np.concatenate(list(self.w_buffer)),
            np.concatenate(list(self.y_buffer)),
        )

    def step(self, e: np.ndarray, w_future: np.ndarray) -> ControlCommand:
        step_index = self.n_steps
        self.n_steps += 1
        e = np.asarray(e, dtype=float)
        u_ini, w_ini, y_ini = self.initial_windows()
        try:
            problem = formulate_deepc_qp(self.hankels, u_ini, w_ini, y_ini, w_future, e, self.params)
            solution = solve_qp(problem, tol=self.params.tol, max_iter=self.params.max_iter)
            self.last_solution = solution
            logger.info(
                f"📍 DeePC step {step_index}: status={solution.status.value} iter={solution.iterations} "
                f"primal={solution.primal_residual:.2e} dual={solution.dual_residual:.2e} "
                f"objective={solution.objective:.4f}"
            )
            command = extract_command(solution, self.hankels, e, relaxed_tol=self.params.relaxed_tol)
        except (SolverError, CommandConservationError) as ex:
            self.n_fallbacks += 1
            logger.warning(f"❌ DeePC step {step_index} failed ({ex}); all vehicles stay")
            command = ControlCommand.stay(e)

        applied = command.u_int if self.params.integer_commands else command.u_float
        self.u_buffer.append(np.asarray(applied, dtype=float).ravel())
        return command


def deepc_step(controller: DeepcController, e: np.ndarray, w_future: np.ndarray) -> ControlCommand:
    return controller.step(e, w_future)
