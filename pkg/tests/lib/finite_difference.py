# tests/lib/finite_difference.py

"""Central finite-difference oracles used by the gradient tests."""

import numpy as np


def central_difference(fn, x, eps=1e-6):
    """
    Gradient of a scalar function of a flat vector by central differences.

    Args:
        fn (callable): vector -> float.
        x (np.ndarray): Evaluation point.
        eps (float): Absolute step.

    Returns:
        np.ndarray: Same shape as x.
    """
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = eps
        grad[i] = (fn(x + step) - fn(x - step)) / (2.0 * eps)
    return grad


def central_difference_scalar(fn, t, eps=1e-6):
    """Derivative of a vector-valued function of one scalar."""
    return (np.asarray(fn(t + eps)) - np.asarray(fn(t - eps))) / (2.0 * eps)


def relative_error(analytic, numeric, floor=1e-8):
    """max |a - n| / max(|n|, floor), taken over all entries against the largest magnitude."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = max(np.max(np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric)) / scale)
