import numpy as np

from src.utils.errors import UndefinedMetricError


def demand_marginals(w_matrices: np.ndarray) -> np.ndarray:
    """(steps, R, R) origin-destination counts -> (steps, 2R) rows of [origin sums, destination sums]."""
    w_matrices = np.asarray(w_matrices, dtype=float)
    return np.concatenate([w_matrices.sum(axis=2), w_matrices.sum(axis=1)], axis=1)


def perturb_forecast(w_true: np.ndarray, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Unbiased Gaussian noise on every OD entry, clipped at zero, then reduced to marginals.

    ``w_true`` is (N, R, R) or a single (R, R) matrix; the result is (N, 2R).
    """
    w_true = np.asarray(w_true, dtype=float)
    if w_true.ndim == 2:
        w_true = w_true[None]
    if sigma2 < 0:
        raise ValueError(f"Noise variance must be nonnegative, got {sigma2}")
    noise = rng.normal(0.0, np.sqrt(sigma2), size=w_true.shape)
    noisy = np.maximum(0.0, w_true + noise)
    return demand_marginals(noisy)


def total_signal_variance(w_history: np.ndarray) -> float:
    w_history = np.asarray(w_history, dtype=float)
    if w_history.shape[0] < 2:
        raise UndefinedMetricError("Signal variance needs at least two time steps")
    return float(np.var(w_history.reshape(w_history.shape[0], -1), axis=0, ddof=1).sum())


def snr_of(w_history: np.ndarray, sigma2: float) -> float:
    """10 log10(sum of per-entry demand variances / noise variance), in dB."""
    if sigma2 <= 0:
        raise UndefinedMetricError("SNR is undefined for zero noise variance")
    return float(10.0 * np.log10(total_signal_variance(w_history) / sigma2))


def sigma2_for_snr(w_history: np.ndarray, snr_db: float) -> float:
    return total_signal_variance(w_history) / (10.0 ** (snr_db / 10.0))
