# src/swing_ident/estimation/sindy.py

"""
SINDy baseline for the swing equation: finite-difference derivatives regressed
onto the candidate library [1, omega, sin(delta)]. Only the omega equation is
identified; d(delta)/dt = omega carries no unknown parameter.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..console_logger import log_component_debug
from ..errors import InsufficientDataError, InvalidParamsError, SingularLibraryError, UnidentifiableInertiaError

LIBRARY_COLUMNS = ('constant', 'omega', 'sin_delta')
RANK_TOL = 1e-10


@dataclass(frozen=True)
class SindyCoefficients:
    """Xi for the omega equation: omega_dot = c0 + c1*omega + c2*sin(delta)."""
    c0: float
    c1: float
    c2: float
    nu: float = 0.0
    residual_norm: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.c0, self.c1, self.c2])):
            raise InvalidParamsError("SINDy coefficients must be finite")
        if self.nu < 0:
            raise InvalidParamsError(f"nu must be >= 0, got {self.nu}")

    def as_array(self):
        return np.array([self.c0, self.c1, self.c2])


@dataclass
class SindyEstimate:
    m_hat: float
    d_hat: float
    B_check: float
    residual_norm: float
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            'm_hat': float(self.m_hat),
            'd_hat': float(self.d_hat),
            'b_check': float(self.B_check),
            'residual_norm': float(self.residual_norm),
            'flags': list(self.flags),
        }


def candidate_library(states):
    """Evaluates zeta(x) = [1, omega, sin(delta)] along the trajectory, shape (N, 3)."""
    states = np.asarray(states, dtype=float)
    return np.column_stack([np.ones(states.shape[0]), states[:, 1], np.sin(states[:, 0])])


def finite_diff_derivatives(traj):
    """
    Central differences in the interior, second-order one-sided stencils at the ends.

    Returns:
        np.ndarray: (N, 2) derivatives (delta_dot, omega_dot).
    """
    if len(traj) < 3:
        raise InsufficientDataError(f"Finite differences need at least 3 samples, got {len(traj)}")
    h = 1.0 / traj.sample_rate
    return np.gradient(traj.states, h, axis=0, edge_order=2)


def _solve_least_squares(A, b, names=LIBRARY_COLUMNS):
    """
    Solves min ||A x - b|| with a column-pivoted QR factorization.

    Raises:
        SingularLibraryError: If A is rank deficient; names the dependent columns.
    """
    Q, R, piv = scipy.linalg.qr(A, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < A.shape[1]:
        raise SingularLibraryError([names[j] for j in piv[rank:]])
    z = scipy.linalg.solve_triangular(R, Q.T @ b)
    x = np.empty_like(z)
    x[piv] = z
    return x


def _sequential_threshold(A, b, nu, max_iterations):
    """Sequentially thresholded least squares: zero |c| < nu, refit the rest."""
    coeffs = _solve_least_squares(A, b)
    for _ in range(max_iterations):
        small = np.abs(coeffs) < nu
        if not np.any(small & (coeffs != 0)):
            break
        coeffs[small] = 0.0
        big = ~small
        if not np.any(big):
            break
        names = [n for n, keep in zip(LIBRARY_COLUMNS, big) if keep]
        coeffs[big] = _solve_least_squares(A[:, big], b, names)
    return coeffs


def fit(traj, nu=0.0, derivatives=None, max_threshold_iterations=10):
    """
    Regresses omega_dot onto the candidate library.

    Args:
        traj (Trajectory): Measured trajectory (N >= 4).
        nu (float): Sparsity weight. 0 gives ordinary least squares.
        derivatives (np.ndarray, optional): (N, 2) derivatives to use instead of
            finite differences (e.g. the exact right-hand side).
        max_threshold_iterations (int): Cap for the thresholding loop.

    Returns:
        SindyCoefficients: (c0, c1, c2) with the residual norm of the regression.
    """
    if len(traj) < 4:
        raise InsufficientDataError(f"SINDy regression needs at least 4 samples, got {len(traj)}")
    if nu < 0:
        raise InvalidParamsError(f"nu must be >= 0, got {nu}")

    if derivatives is None:
        derivatives = finite_diff_derivatives(traj)
    derivatives = np.asarray(derivatives, dtype=float)

    A = candidate_library(traj.states)
    b = derivatives[:, 1]
    if nu > 0:
        coeffs = _sequential_threshold(A, b, nu, max_threshold_iterations)
    else:
        coeffs = _solve_least_squares(A, b)

    residual_norm = float(np.linalg.norm(A @ coeffs - b))
    log_component_debug(f"Fitted Xi = {np.array2string(coeffs, precision=6)}, residual = {residual_norm:.3e}", 'sindy')

    # kinematic row d(delta)/dt = omega is not estimated, only checked
    kinematic_mismatch = float(np.max(np.abs(derivatives[:, 0] - traj.omega)))
    log_component_debug(f"max |delta_dot - omega| = {kinematic_mismatch:.3e}", 'sindy')

    return SindyCoefficients(c0=float(coeffs[0]), c1=float(coeffs[1]), c2=float(coeffs[2]),
                             nu=float(nu), residual_norm=residual_norm)


def extract_params(coeffs, P, B, b_check_tolerance=0.2):
    """
    Maps the regression coefficients back to (m, d).

    m_hat = P / c0, d_hat = -c1 * m_hat, B_check = -c2 * m_hat.

    Raises:
        UnidentifiableInertiaError: If c0 is numerically zero.
    """
    if abs(coeffs.c0) <= 1e-12:
        raise UnidentifiableInertiaError(f"Constant coefficient c0 = {coeffs.c0:.3e} is zero; inertia cannot be identified")

    m_hat = P / coeffs.c0
    d_hat = -coeffs.c1 * m_hat
    B_check = -coeffs.c2 * m_hat

    flags = []
    if abs(B_check - B) / B > b_check_tolerance:
        flags.append('b_check_mismatch')
    if m_hat <= 0:
        flags.append('nonpositive_inertia')
    if d_hat < 0:
        flags.append('negative_damping')

    return SindyEstimate(m_hat=m_hat, d_hat=d_hat, B_check=B_check,
                         residual_norm=coeffs.residual_norm, flags=flags)


def estimate(traj, P, B, nu=0.0, derivatives=None):
    """Fits and extracts in one call."""
    return extract_params(fit(traj, nu=nu, derivatives=derivatives), P, B)
