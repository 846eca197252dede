import json
import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from src.deepc.views import HankelSet, SignalSeries
from src.utils.errors import HankelLengthError, LengthMismatchError, MissingCollectedDataError
from src.utils.utils import write_csv_atomic, write_text_atomic

logger = logging.getLogger(__name__)


def _as_series(series) -> SignalSeries:
    return series if isinstance(series, SignalSeries) else SignalSeries(np.asarray(series, dtype=float))


def build_hankel(series, L: int) -> np.ndarray:
    """Block-Hankel matrix of depth L; column j stacks samples j..j+L-1."""
    series = _as_series(series)
    if L < 1:
        raise HankelLengthError(f"Hankel depth must be at least 1, got {L}")
    if series.length < L:
        raise HankelLengthError(f"Series of length {series.length} is too short for depth {L}")
    # windows: (T_d - L + 1, dim, L) -> rows ordered time-major, dim-minor
    windows = sliding_window_view(series.samples, L, axis=0)
    return np.ascontiguousarray(windows.transpose(0, 2, 1).reshape(windows.shape[0], L * series.dim).T)


def hankel_rank(matrix: np.ndarray) -> int:
    if matrix.size == 0:
        return 0
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    threshold = max(matrix.shape) * np.finfo(float).eps * singular_values[0]
    return int(np.sum(singular_values > threshold))


def is_persistently_exciting(series, L: int) -> bool:
    series = _as_series(series)
    hankel = build_hankel(series, L)
    return hankel_rank(hankel) == series.dim * L


def excitation_signal(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Stacked (u, w) without the last destination channel.

    Origin and destination counts of the same requests always have equal totals, so
    one channel of w is a linear combination of the others.
    """
    return np.hstack([u, w[:, :-1]])


def excitation_check(u: np.ndarray, w: np.ndarray, order: int) -> dict:
    """Rank of the stacked (u, w) Hankel matrix of depth ``order``.

    ``rank`` is None when the data has fewer windows than full rank needs.
    """
    stacked = excitation_signal(np.asarray(u, dtype=float), np.asarray(w, dtype=float))
    required = stacked.shape[1] * order
    columns = stacked.shape[0] - order + 1
    rank = hankel_rank(build_hankel(stacked, order)) if columns >= required else None
    return {
        "order": order,
        "required_rank": required,
        "rank": rank,
        "persistently_exciting": rank == required,
    }


def assemble_hankel_set(u_series, w_series, y_series, T_ini: int, N: int, n_assumed: Optional[int] = None) -> HankelSet:
    u_series, w_series, y_series = (_as_series(s) for s in (u_series, w_series, y_series))
    T_d = u_series.length
    if w_series.length != T_d or y_series.length != T_d:
        raise LengthMismatchError(
            f"Collected series lengths differ: u={u_series.length}, w={w_series.length}, y={y_series.length}"
        )
    L = T_ini + N
    if T_d < L:
        raise HankelLengthError(f"T_d = {T_d} is shorter than T_ini + N = {L}")

    m, q, p = u_series.dim, w_series.dim, y_series.dim
    H_u = build_hankel(u_series, L)
    H_w = build_hankel(w_series, L)
    H_y = build_hankel(y_series, L)

    if n_assumed is not None:
        check = excitation_check(u_series.samples, w_series.samples, L + n_assumed)
        if check["rank"] is None:
            logger.warning(
                f"⚠️ Data of length {T_d} cannot be persistently exciting of order {check['order']} "
                f"({check['required_rank']} rows needed)"
            )
        elif not check["persistently_exciting"]:
            logger.warning(
                f"⚠️ Collected (u, w) not persistently exciting of order {check['order']}: "
                f"rank {check['rank']} < {check['required_rank']}"
            )

    return HankelSet(
        U_p=H_u[: m * T_ini],
        U_f=H_u[m * T_ini :],
        W_p=H_w[: q * T_ini],
        W_f=H_w[q * T_ini :],
        Y_p=H_y[: p * T_ini],
        Y_f=H_y[p * T_ini :],
        m=m,
        q=q,
        p=p,
        T_ini=T_ini,
        N=N,
        T_d=T_d,
    )


@dataclass(frozen=True)
class CollectedData:
    u: np.ndarray
    w: np.ndarray
    y: np.ndarray
    metadata: dict
    e: Optional[np.ndarray] = None

    @property
    def T_d(self) -> int:
        return self.u.shape[0]


def collected_columns(m: int, q: int, p: int) -> list[str]:
    return (
        ["k"]
        + [f"u_{i}" for i in range(m)]
        + [f"w_{i}" for i in range(q)]
        + [f"y_{i}" for i in range(p)]
    )


def save_collected_data(data: CollectedData, path: str) -> str:
    m, q, p = data.u.shape[1], data.w.shape[1], data.y.shape[1]
    table = np.hstack([np.arange(data.T_d)[:, None], data.u, data.w, data.y])
    df = pd.DataFrame(table, columns=collected_columns(m, q, p))
    df["k"] = df["k"].astype(int)
    write_csv_atomic(df, path)
    write_text_atomic(json.dumps(data.metadata, indent=2, sort_keys=True) + "\n", metadata_path(path))
    return path


def metadata_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".json"


def load_collected_data(path: str) -> CollectedData:
    if not os.path.exists(path):
        raise MissingCollectedDataError(path)
    df = pd.read_csv(path, encoding="utf-8")
    u = df[[c for c in df.columns if c.startswith("u_")]].to_numpy(dtype=float)
    w = df[[c for c in df.columns if c.startswith("w_")]].to_numpy(dtype=float)
    y = df[[c for c in df.columns if c.startswith("y_")]].to_numpy(dtype=float)
    metadata = {}
    if os.path.exists(metadata_path(path)):
        with open(metadata_path(path), "r", encoding="utf-8") as f:
            metadata = json.load(f)
    return CollectedData(u=u, w=w, y=y, metadata=metadata)
