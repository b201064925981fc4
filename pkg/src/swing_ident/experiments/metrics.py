# src/swing_ident/experiments/metrics.py

import numpy as np
from scipy.stats import spearmanr

from ..errors import UndefinedPercentError


def percent_error(lambda_hat, lambda_true):
    """
    |(lambda_hat - lambda) / lambda| * 100 per component.

    Args:
        lambda_hat (array-like): Estimated (m, d).
        lambda_true (array-like): True (m, d); components must be nonzero.

    Returns:
        np.ndarray: Percent errors, same shape as the inputs.
    """
    lambda_hat = np.asarray(lambda_hat, dtype=float)
    lambda_true = np.asarray(lambda_true, dtype=float)
    if np.any(lambda_true == 0):
        raise UndefinedPercentError(f"Percent error undefined for a zero true parameter: {lambda_true}")
    return np.abs((lambda_hat - lambda_true) / lambda_true) * 100.0


def rmse(a, b, axis=0):
    return np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2, axis=axis))


def rank_correlation(tau, eps):
    """
    Spearman rank correlation of tau against eps over finite pairs.

    Returns:
        float: rho, or NaN when fewer than 3 finite pairs are available or one
            side is constant.
    """
    tau = np.asarray(tau, dtype=float)
    eps = np.asarray(eps, dtype=float)
    ok = np.isfinite(tau) & np.isfinite(eps)
    if np.count_nonzero(ok) < 3 or np.ptp(tau[ok]) == 0 or np.ptp(eps[ok]) == 0:
        return float('nan')
    rho, _ = spearmanr(tau[ok], eps[ok])
    return float(rho)
