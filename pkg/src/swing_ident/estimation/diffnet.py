# src/swing_ident/estimation/diffnet.py

"""
One-hidden-layer tanh surrogate x_hat = W2 tanh(W1 [t_norm, P] + b1) + b2 with
its exact physical-time derivative and the exact adjoint (reverse) pass for any
scalar built from those two outputs.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from ..errors import GradientOverflowError, InvalidParamsError

N_INPUTS = 2
N_OUTPUTS = 2


@dataclass
class NetParams:
    """Weights and biases Theta. W1: (H, 2), b1: (H,), W2: (2, H), b2: (2,)."""
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.W2 = np.asarray(self.W2, dtype=float)
        self.b2 = np.asarray(self.b2, dtype=float)
        H = self.b1.shape[0] if self.b1.ndim == 1 else -1
        if H < 1 or self.W1.shape != (H, N_INPUTS) or self.W2.shape != (N_OUTPUTS, H) or self.b2.shape != (N_OUTPUTS,):
            raise InvalidParamsError(
                f"Inconsistent network shapes: W1 {self.W1.shape}, b1 {self.b1.shape}, W2 {self.W2.shape}, b2 {self.b2.shape}")

    @property
    def hidden_size(self):
        return self.b1.shape[0]

    @property
    def size(self):
        return self.W1.size + self.b1.size + self.W2.size + self.b2.size

    def to_vector(self):
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    @classmethod
    def from_vector(cls, vec, hidden_size):
        vec = np.asarray(vec, dtype=float)
        H = hidden_size
        i1 = H * N_INPUTS
        i2 = i1 + H
        i3 = i2 + N_OUTPUTS * H
        if vec.size != i3 + N_OUTPUTS:
            raise InvalidParamsError(f"Vector of size {vec.size} does not match hidden size {H}")
        return cls(W1=vec[:i1].reshape(H, N_INPUTS), b1=vec[i1:i2],
                   W2=vec[i2:i3].reshape(N_OUTPUTS, H), b2=vec[i3:])

    @classmethod
    def zeros(cls, hidden_size):
        return cls(W1=np.zeros((hidden_size, N_INPUTS)), b1=np.zeros(hidden_size),
                   W2=np.zeros((N_OUTPUTS, hidden_size)), b2=np.zeros(N_OUTPUTS))

    def __add__(self, other):
        return NetParams(self.W1 + other.W1, self.b1 + other.b1, self.W2 + other.W2, self.b2 + other.b2)

    def scaled(self, factor):
        return NetParams(self.W1 * factor, self.b1 * factor, self.W2 * factor, self.b2 * factor)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.to_vector())))

    def to_dict(self):
        return {
            'w1': self.W1.tolist(),
            'b1': self.b1.tolist(),
            'w2': self.W2.tolist(),
            'b2': self.b2.tolist(),
            'hidden_size': int(self.hidden_size),
        }

    @classmethod
    def from_dict(cls, data):
        theta = cls(W1=data['w1'], b1=data['b1'], W2=data['w2'], b2=data['b2'])
        if int(data.get('hidden_size', theta.hidden_size)) != theta.hidden_size:
            raise InvalidParamsError("hidden_size does not match the stored arrays")
        return theta


def init_params(hidden_size=10, seed=0):
    """
    Zero-mean Gaussian weights with std 1/sqrt(fan_in); zero biases.
    """
    if hidden_size < 1:
        raise InvalidParamsError(f"hidden_size must be >= 1, got {hidden_size}")
    rng = np.random.default_rng(seed)
    W1 = rng.normal(0.0, 1.0 / np.sqrt(N_INPUTS), size=(hidden_size, N_INPUTS))
    W2 = rng.normal(0.0, 1.0 / np.sqrt(hidden_size), size=(N_OUTPUTS, hidden_size))
    return NetParams(W1=W1, b1=np.zeros(hidden_size), W2=W2, b2=np.zeros(N_OUTPUTS))


def save_params(theta, file_path):
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, 'w') as f:
        json.dump(theta.to_dict(), f, indent=2)


def load_params(file_path):
    with open(file_path, 'r') as f:
        return NetParams.from_dict(json.load(f))


# --- Forward pass ---

def _inputs(t_norm, P):
    t_norm = np.atleast_1d(np.asarray(t_norm, dtype=float))
    P_col = np.broadcast_to(np.asarray(P, dtype=float), t_norm.shape)
    return np.column_stack([t_norm, P_col])


def _hidden(theta, X):
    Z = X @ theta.W1.T + theta.b1
    A = np.tanh(Z)
    return Z, A


def forward(theta, t_norm, P):
    """
    Evaluates the surrogate at a batch of normalized times.

    Args:
        theta (NetParams): Network parameters.
        t_norm (float or np.ndarray): Normalized time t / T, shape (N,).
        P (float): Active power input (constant per scenario).

    Returns:
        np.ndarray: (N, 2) predictions (delta_hat, omega_hat).
    """
    X = _inputs(t_norm, P)
    _, A = _hidden(theta, X)
    return A @ theta.W2.T + theta.b2


def time_derivative(theta, t_norm, P, T):
    """
    Exact derivative of the surrogate with respect to physical time.

    Returns:
        np.ndarray: (N, 2) values (1/T) W2 diag(1 - tanh(z)^2) W1[:, 0].
    """
    if T <= 0:
        raise InvalidParamsError(f"Trajectory length T must be positive, got {T}")
    X = _inputs(t_norm, P)
    _, A = _hidden(theta, X)
    S = 1.0 - A ** 2
    return ((S * theta.W1[:, 0]) @ theta.W2.T) / T


def forward_with_derivative(theta, t_norm, P, T):
    """Returns (x_hat, dx_hat/dt, cache) sharing one hidden-layer evaluation."""
    X = _inputs(t_norm, P)
    _, A = _hidden(theta, X)
    S = 1.0 - A ** 2
    out = A @ theta.W2.T + theta.b2
    dot = ((S * theta.W1[:, 0]) @ theta.W2.T) / T
    return out, dot, (X, A, S, T)


# --- Reverse pass ---

def grad_scalar(theta, t_norm, P, T, out_adjoint=None, dot_adjoint=None, cache=None):
    """
    Exact gradient of a scalar L with respect to every entry of Theta, given
    the adjoints dL/dx_hat and dL/d(dx_hat/dt) at each batch point.

    Args:
        theta (NetParams): Network parameters.
        t_norm (np.ndarray): Normalized times, shape (N,).
        P (float): Active power input.
        T (float): Trajectory length used in the time normalization.
        out_adjoint (np.ndarray, optional): (N, 2) dL/dx_hat. None means zero.
        dot_adjoint (np.ndarray, optional): (N, 2) dL/d(dx_hat/dt). None means zero.
        cache (tuple, optional): Third return value of `forward_with_derivative`.

    Returns:
        NetParams: Gradient with the same shapes as theta.
    """
    if cache is None:
        X = _inputs(t_norm, P)
        _, A = _hidden(theta, X)
        S = 1.0 - A ** 2
    else:
        X, A, S, T = cache

    dW1 = np.zeros_like(theta.W1)
    db1 = np.zeros_like(theta.b1)
    dW2 = np.zeros_like(theta.W2)
    db2 = np.zeros_like(theta.b2)
    dZ = np.zeros_like(A)

    if out_adjoint is not None:
        G = np.asarray(out_adjoint, dtype=float).reshape(A.shape[0], N_OUTPUTS)
        dW2 += G.T @ A
        db2 += G.sum(axis=0)
        dZ += (G @ theta.W2) * S

    if dot_adjoint is not None:
        Gd = np.asarray(dot_adjoint, dtype=float).reshape(A.shape[0], N_OUTPUTS)
        w1t = theta.W1[:, 0]
        U = S * w1t
        dW2 += (Gd.T @ U) / T
        dU = (Gd @ theta.W2) / T
        dW1[:, 0] += np.sum(dU * S, axis=0)
        # dS/dZ = -2 tanh(z) (1 - tanh(z)^2)
        dZ += dU * w1t * (-2.0 * A * S)

    dW1 += dZ.T @ X
    db1 += dZ.sum(axis=0)

    grad = NetParams(W1=dW1, b1=db1, W2=dW2, b2=db2)
    if not grad.is_finite():
        raise GradientOverflowError("Non-finite intermediate in the network gradient")
    return grad


# --- Ensemble passes ---

def unpack_batch(thetas, hidden_size):
    """Splits an (n, size) matrix of flat parameter vectors into W1 (n, H, 2), b1 (n, H), W2 (n, 2, H), b2 (n, 2)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    n = thetas.shape[0]
    H = hidden_size
    i1 = H * N_INPUTS
    i2 = i1 + H
    i3 = i2 + N_OUTPUTS * H
    if thetas.shape[1] != i3 + N_OUTPUTS:
        raise InvalidParamsError(f"Rows of size {thetas.shape[1]} do not match hidden size {H}")
    return (thetas[:, :i1].reshape(n, H, N_INPUTS), thetas[:, i1:i2],
            thetas[:, i2:i3].reshape(n, N_OUTPUTS, H), thetas[:, i3:])


def forward_batch(thetas, hidden_size, t_norm, P, T):
    """
    `forward_with_derivative` for n parameter vectors at once.

    Returns:
        tuple: (x_hat (n, N, 2), dx_hat/dt (n, N, 2), cache)
    """
    W1, b1, W2, b2 = unpack_batch(thetas, hidden_size)
    X = _inputs(t_norm, P)
    A = np.tanh(np.einsum('ni,phi->pnh', X, W1) + b1[:, None, :])
    S = 1.0 - A ** 2
    out = np.einsum('pnh,pkh->pnk', A, W2) + b2[:, None, :]
    dot = np.einsum('pnh,pkh->pnk', S * W1[:, None, :, 0], W2) / T
    return out, dot, (X, A, S, T)


def grad_batch(thetas, hidden_size, out_adjoint=None, dot_adjoint=None, cache=None):
    """
    `grad_scalar` for n parameter vectors; adjoints are (n, N, 2) and the cache
    comes from `forward_batch`.

    Returns:
        np.ndarray: (n, size) gradients in `to_vector` order.
    """
    W1, _, W2, _ = unpack_batch(thetas, hidden_size)
    X, A, S, T = cache
    n = W1.shape[0]
    dW1 = np.zeros_like(W1)
    dW2 = np.zeros_like(W2)
    db2 = np.zeros((n, N_OUTPUTS))
    dZ = np.zeros_like(A)

    if out_adjoint is not None:
        dW2 += np.einsum('pnk,pnh->pkh', out_adjoint, A)
        db2 += out_adjoint.sum(axis=1)
        dZ += np.einsum('pnk,pkh->pnh', out_adjoint, W2) * S

    if dot_adjoint is not None:
        w1t = W1[:, None, :, 0]
        dW2 += np.einsum('pnk,pnh->pkh', dot_adjoint, S * w1t) / T
        dU = np.einsum('pnk,pkh->pnh', dot_adjoint, W2) / T
        dW1[:, :, 0] += np.sum(dU * S, axis=1)
        dZ += dU * w1t * (-2.0 * A * S)

    dW1 += np.einsum('pnh,ni->phi', dZ, X)
    grad = np.concatenate([dW1.reshape(n, -1), dZ.sum(axis=1), dW2.reshape(n, -1), db2], axis=1)
    if not np.all(np.isfinite(grad)):
        raise GradientOverflowError("Non-finite intermediate in the network gradient")
    return grad
