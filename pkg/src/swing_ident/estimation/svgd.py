# src/swing_ident/estimation/svgd.py

"""
Stein Variational Gradient Descent on a particle matrix X of shape (n, D).

    phi(x_i) = 1/n sum_j [ k(x_j, x_i) grad log p(x_j) + grad_{x_j} k(x_j, x_i) ]

with the RBF kernel k(a, b) = exp(-||a - b||^2 / h) and the median heuristic
h = med^2 / log(n + 1).
"""

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ..console_logger import log_component_debug, logger

DEFAULT_BANDWIDTH_FLOOR = 1e-6


def median_bandwidth(X, bandwidth_floor=DEFAULT_BANDWIDTH_FLOOR):
    """
    Median-heuristic bandwidth over pairwise particle distances.

    Returns 1.0 for a single particle (the kernel is then identically 1).
    """
    n = X.shape[0]
    if n < 2:
        return 1.0
    med = np.median(pdist(X))
    h = med ** 2 / np.log(n + 1)
    if h < bandwidth_floor:
        logger.warning(f"SVGD ensemble has collapsed (median distance {med:.2e}); bandwidth floored at {bandwidth_floor:g}, repulsion vanishes")
        h = bandwidth_floor
    return h


def rbf_kernel(X, bandwidth):
    """Kernel matrix K[i, j] = exp(-||x_i - x_j||^2 / h); symmetric with unit diagonal."""
    if X.shape[0] < 2:
        return np.ones((X.shape[0], X.shape[0]))
    return np.exp(-squareform(pdist(X, 'sqeuclidean')) / bandwidth)


def svgd_direction(X, grads, bandwidth_floor=DEFAULT_BANDWIDTH_FLOOR):
    """
    Stein direction for every particle.

    Args:
        X (np.ndarray): (n, D) particle positions.
        grads (np.ndarray): (n, D) gradients of log p at each particle.
        bandwidth_floor (float): Lower bound for h.

    Returns:
        tuple: (phi (n, D), bandwidth h)
    """
    n = X.shape[0]
    h = median_bandwidth(X, bandwidth_floor)
    K = rbf_kernel(X, h)
    drive = K @ grads
    # sum_j grad_{x_j} k(x_j, x_i) = (2/h) (x_i sum_j k_ij - sum_j k_ij x_j)
    repulsion = (2.0 / h) * (X * K.sum(axis=1, keepdims=True) - K @ X)
    return (drive + repulsion) / n, h


def svgd_update(X, grads, stepsize, preconditioner=None, bandwidth_floor=DEFAULT_BANDWIDTH_FLOOR):
    """
    Moves every particle by stepsize * phi. Gradients are gathered before any
    particle moves.

    Args:
        X (np.ndarray): (n, D) particles.
        grads (np.ndarray): (n, D) gradients of log p evaluated at X.
        stepsize (float): Step size (> 0).
        preconditioner (AdagradMomentum, optional): Element-wise scaling of phi.

    Returns:
        np.ndarray: Updated (n, D) particles.
    """
    if stepsize <= 0:
        raise ValueError(f"stepsize must be positive, got {stepsize}")
    phi, h = svgd_direction(X, grads, bandwidth_floor)
    if preconditioner is not None:
        phi = preconditioner.scale(phi)
    log_component_debug(f"bandwidth h = {h:.3e}, max |phi| = {np.max(np.abs(phi)):.3e}", 'svgd')
    return X + stepsize * phi


def run_svgd(grad_log_p, X0, iterations, stepsize, preconditioner=None, bandwidth_floor=DEFAULT_BANDWIDTH_FLOOR):
    """
    Generic SVGD loop for a target given by its score function.

    Args:
        grad_log_p (callable): x (D,) -> grad log p(x) (D,).
        X0 (np.ndarray): (n, D) initial particles.
        iterations (int): Number of updates.
        stepsize (float): Constant step size.

    Returns:
        np.ndarray: Final particles.
    """
    X = np.array(X0, dtype=float, copy=True)
    for _ in range(iterations):
        grads = np.stack([grad_log_p(x) for x in X])
        X = svgd_update(X, grads, stepsize, preconditioner, bandwidth_floor)
    return X
