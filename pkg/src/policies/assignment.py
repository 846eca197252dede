from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class Assignment:
    """Min-cost pairing of rows (vehicles) to columns (requests)."""

    rows: np.ndarray
    cols: np.ndarray
    total_cost: float

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(r), int(c)) for r, c in zip(self.rows, self.cols)]


def solve_assignment(cost: np.ndarray) -> Assignment:
    """Rectangular Hungarian assignment; matches min(rows, cols) pairs."""
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return Assignment(rows=np.zeros(0, dtype=int), cols=np.zeros(0, dtype=int), total_cost=0.0)
    rows, cols = linear_sum_assignment(cost)
    return Assignment(rows=rows, cols=cols, total_cost=float(cost[rows, cols].sum()))
