# src/swing_ident/estimation/pinn.py

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from ..console_logger import log_component_debug, log_progress, logger
from ..errors import ConfigError, GradientOverflowError, InsufficientDataError, InvalidParamsError, TrainingDivergedError
from . import diffnet
from .optimizers import Adam
from .parameters import define_parameters


@dataclass
class PinnConfig:
    epochs: int = 20000
    learning_rate: float = 1e-2
    w_data: float = 10.0
    w_phys: float = 1.0
    seed: int = 0
    lambda_init: tuple = (1.0, 1.0)
    hidden_size: int = 32
    warmup_epochs: int = 10000
    lbfgs_iterations: int = 5000
    log_every: int = 2000
    record_trace: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.w_data < 0 or self.w_phys < 0 or (self.w_data == 0 and self.w_phys == 0):
            raise ConfigError("Loss weights must be >= 0 with at least one positive")
        if len(self.lambda_init) != 2 or min(self.lambda_init) <= 0:
            raise ConfigError(f"lambda_init must be two positive values, got {self.lambda_init}")
        if self.warmup_epochs < 0 or self.lbfgs_iterations < 0:
            raise ConfigError("warmup_epochs and lbfgs_iterations must be >= 0")

    @classmethod
    def from_params(cls, params=None, **overrides):
        params = define_parameters() if params is None else params
        values = {'hidden_size': params['network_params']['hidden_size'], **params['pinn_params']}
        values.update(overrides)
        values['lambda_init'] = tuple(values['lambda_init'])
        return cls(**values)


@dataclass
class PinnResult:
    m_hat: float
    d_hat: float
    final_data_loss: float
    final_physics_loss: float
    theta: diffnet.NetParams
    epochs: int = 0
    seed: int = 0
    loss_trace: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            'm_hat': float(self.m_hat),
            'd_hat': float(self.d_hat),
            'losses': {'data': float(self.final_data_loss), 'physics': float(self.final_physics_loss)},
            'epochs': int(self.epochs),
            'seed': int(self.seed),
        }


# --- Collocation helpers ---

def normalized_times(dataset):
    """Returns (t_norm, T) with t_norm = (t - t0) / T in [0, 1]."""
    T = float(dataset.duration)
    if T <= 0:
        raise InsufficientDataError("Dataset spans zero time")
    return (dataset.times - dataset.times[0]) / T, T


# --- Losses ---

def data_loss(theta, dataset, P):
    """Mean squared error over samples and both state dimensions (P is the network input)."""
    if len(dataset) == 0:
        raise InsufficientDataError("Dataset is empty")
    t_norm, _ = normalized_times(dataset)
    residual = diffnet.forward(theta, t_norm, P) - dataset.states
    return float(np.mean(residual ** 2))


def rhs_on_outputs(out, m, d, P, B):
    """f(x_hat; lambda) evaluated on the surrogate outputs, shape (..., N, 2)."""
    delta_hat = out[..., 0]
    omega_hat = out[..., 1]
    return np.stack([omega_hat, (P - d * omega_hat - B * np.sin(delta_hat)) / m], axis=-1)


def physics_residual(theta, lam, t_norm, P, B, T):
    """
    h = d/dt x_hat - f(x_hat; lambda) at the given normalized times.

    Args:
        theta (NetParams): Network parameters.
        lam (tuple): (m, d), m > 0.
        t_norm (np.ndarray): Normalized collocation times.
        P, B (float): Scenario constants.
        T (float): Trajectory length used in the normalization.

    Returns:
        np.ndarray: (N, 2) residuals.
    """
    m, d = lam
    if m <= 0:
        raise InvalidParamsError(f"Inertia must be positive in the residual, got {m}")
    out, dot, _ = diffnet.forward_with_derivative(theta, t_norm, P, T)
    return dot - rhs_on_outputs(out, m, d, P, B)


def residual_backward(out, m, d, P, B, h_adjoint):
    """
    Pulls dL/dh back onto the network outputs, their time derivative and the
    log-parameters (log m, log d). For a batch of particles `out` is (n, N, 2)
    and m, d are (n, 1) columns; the log-parameter gradients are then (n,).

    Returns:
        tuple: (out_adjoint, dot_adjoint, grad_log_m, grad_log_d)
    """
    g0 = h_adjoint[..., 0]
    g1 = h_adjoint[..., 1]
    delta_hat = out[..., 0]
    omega_hat = out[..., 1]

    out_adjoint = np.stack([
        g1 * B * np.cos(delta_hat) / m,
        -g0 + g1 * d / m,
    ], axis=-1)
    f1 = (P - d * omega_hat - B * np.sin(delta_hat)) / m
    grad_log_m = np.sum(g1 * f1, axis=-1)
    grad_log_d = np.sum(g1 * omega_hat * d / m, axis=-1)
    return out_adjoint, h_adjoint, grad_log_m, grad_log_d


def lambda_least_squares(out, dot, P, B):
    """
    (m, d) that best explain the surrogate's own acceleration: regresses
    d omega_hat/dt on [P - B sin(delta_hat), -omega_hat] for (1/m, d/m).

    Returns:
        tuple or None: (m, d), or None when either coefficient is not positive.
    """
    A = np.column_stack([P - B * np.sin(out[:, 0]), -out[:, 1]])
    coeffs, _, rank, _ = scipy.linalg.lstsq(A, dot[:, 1])
    inv_m, d_over_m = coeffs
    if rank < 2 or not (inv_m > 0 and d_over_m > 0):
        return None
    return 1.0 / inv_m, d_over_m / inv_m


def loss_and_grad(theta, log_lam, dataset, P, B, w_data=1.0, w_phys=1.0):
    """
    Total loss w_data * L_data + w_phys * mean ||h||^2 and its gradient with
    respect to (Theta, log m, log d).

    Returns:
        tuple: (total, data_loss, physics_loss, grad_theta (NetParams), grad_log_lam (np.ndarray))
    """
    t_norm, T = normalized_times(dataset)
    m, d = np.exp(log_lam)
    N = len(dataset)

    out, dot, cache = diffnet.forward_with_derivative(theta, t_norm, P, T)
    residual = out - dataset.states
    h = dot - rhs_on_outputs(out, m, d, P, B)

    l_data = float(np.mean(residual ** 2))
    l_phys = float(np.sum(h ** 2) / N)
    total = w_data * l_data + w_phys * l_phys

    out_adjoint = w_data * residual / N
    dot_adjoint = None
    grad_log_lam = np.zeros(2)
    if w_phys > 0:
        h_out_adj, h_dot_adj, g_m, g_d = residual_backward(out, m, d, P, B, w_phys * 2.0 * h / N)
        out_adjoint = out_adjoint + h_out_adj
        dot_adjoint = h_dot_adj
        grad_log_lam = np.array([g_m, g_d])

    grad_theta = diffnet.grad_scalar(theta, t_norm, P, T, out_adjoint=out_adjoint,
                                     dot_adjoint=dot_adjoint, cache=cache)
    return total, l_data, l_phys, grad_theta, grad_log_lam


# --- Training ---

def fit_data(theta, dataset, P, epochs, learning_rate, log_every=0):
    """
    Data-only Adam fit of the surrogate; lambda plays no role.

    Returns:
        NetParams: Fitted network.
    """
    hidden = theta.hidden_size
    vec = theta.to_vector()
    optimizer = Adam(learning_rate=learning_rate)
    log_lam = np.zeros(2)
    for epoch in range(epochs):
        theta = diffnet.NetParams.from_vector(vec, hidden)
        _, l_data, _, g_theta, _ = loss_and_grad(theta, log_lam, dataset, P, 0.0, w_data=1.0, w_phys=0.0)
        if not np.isfinite(l_data):
            raise TrainingDivergedError(epoch, what="warm-up epoch")
        vec = vec + optimizer.step(g_theta.to_vector())
        if log_every and epoch % log_every == 0:
            log_progress('pinn_warmup', 'epoch', epoch, 'log_pinn_progress', data=l_data)
    return diffnet.NetParams.from_vector(vec, hidden)


def initial_lambda(theta, dataset, P, B, config):
    """Least-squares (m, d) of the warmed-up surrogate, or `lambda_init` when that fit is not physical."""
    if config.warmup_epochs == 0 or config.w_phys == 0:
        return tuple(config.lambda_init)
    t_norm, T = normalized_times(dataset)
    out, dot, _ = diffnet.forward_with_derivative(theta, t_norm, P, T)
    lam = lambda_least_squares(out, dot, P, B)
    if lam is None:
        logger.warning(f"Surrogate fit gives no positive (m, d); starting from {config.lambda_init}")
        return tuple(config.lambda_init)
    log_component_debug(f"Least-squares start: m = {lam[0]:.4f}, d = {lam[1]:.4f}", 'pinn')
    return lam


def polish(z, n_theta, dataset, P, B, config):
    """
    L-BFGS refinement of (Theta, log m, log d) on the same weighted loss. The
    Adam point is kept when the refinement does not lower the loss.
    """
    def objective(vec):
        theta = diffnet.NetParams.from_vector(vec[:n_theta], config.hidden_size)
        try:
            total, _, _, g_theta, g_lam = loss_and_grad(theta, vec[n_theta:], dataset, P, B, config.w_data, config.w_phys)
        except GradientOverflowError:
            return np.inf, np.zeros_like(vec)
        return total, np.concatenate([g_theta.to_vector(), g_lam])

    start, _ = objective(z)
    result = scipy.optimize.minimize(objective, z, jac=True, method='L-BFGS-B',
                                     options={'maxiter': config.lbfgs_iterations, 'ftol': 1e-15, 'gtol': 1e-12})
    if not (np.isfinite(result.fun) and result.fun <= start):
        logger.warning(f"L-BFGS refinement did not improve the loss ({result.message}); keeping the Adam point")
        return z
    log_component_debug(f"L-BFGS: loss {start:.3e} -> {result.fun:.3e} in {result.nit} iterations", 'pinn')
    return result.x


def train(dataset, P, B, config=None):
    """
    Fits Theta and lambda = (m, d) to the weighted PINN loss in three phases:
    a data-only Adam warm-up of the surrogate, joint Adam from the least-squares
    lambda of the warmed-up surrogate, and an L-BFGS refinement.

    Args:
        dataset (Trajectory): Measurements.
        P, B (float): Scenario constants.
        config (PinnConfig): Hyper-parameters; defaults from `define_parameters()`.

    Returns:
        PinnResult: Point estimates, final losses and the trained network. The
            loss trace covers the joint Adam epochs.
    """
    config = PinnConfig.from_params() if config is None else config
    theta = diffnet.init_params(config.hidden_size, seed=config.seed)
    log_component_debug(f"Training on {len(dataset)} samples: {config.warmup_epochs} warm-up and "
                        f"{config.epochs} joint epochs (seed {config.seed})", 'pinn')
    if config.warmup_epochs:
        theta = fit_data(theta, dataset, P, config.warmup_epochs, config.learning_rate, config.log_every)
    log_lam = np.log(np.asarray(initial_lambda(theta, dataset, P, B, config), dtype=float))
    n_theta = theta.size
    z = np.concatenate([theta.to_vector(), log_lam])

    optimizer = Adam(learning_rate=config.learning_rate)
    trace = np.empty((config.epochs, 3)) if config.record_trace else None

    for epoch in range(config.epochs):
        theta = diffnet.NetParams.from_vector(z[:n_theta], config.hidden_size)
        total, l_data, l_phys, g_theta, g_lam = loss_and_grad(
            theta, z[n_theta:], dataset, P, B, config.w_data, config.w_phys)
        if not np.isfinite(total):
            raise TrainingDivergedError(epoch)
        if trace is not None:
            trace[epoch] = (total, l_data, l_phys)

        z = z + optimizer.step(np.concatenate([g_theta.to_vector(), g_lam]))

        if config.log_every and epoch % config.log_every == 0:
            m, d = np.exp(z[n_theta:])
            log_progress('pinn', 'epoch', epoch, 'log_pinn_progress',
                         loss=total, data=l_data, phys=l_phys, m=m, d=d)

    if config.lbfgs_iterations:
        z = polish(z, n_theta, dataset, P, B, config)

    theta = diffnet.NetParams.from_vector(z[:n_theta], config.hidden_size)
    total, l_data, l_phys, _, _ = loss_and_grad(theta, z[n_theta:], dataset, P, B, config.w_data, config.w_phys)
    if not np.isfinite(total):
        raise TrainingDivergedError(config.epochs)
    m_hat, d_hat = np.exp(z[n_theta:])
    logger.info(f"PINN finished: m_hat = {m_hat:.4f}, d_hat = {d_hat:.4f}, data loss = {l_data:.3e}, physics loss = {l_phys:.3e}")

    return PinnResult(m_hat=float(m_hat), d_hat=float(d_hat), final_data_loss=l_data,
                      final_physics_loss=l_phys, theta=theta, epochs=config.epochs,
                      seed=config.seed, loss_trace=trace)


def write_loss_trace(result, file_path):
    """Writes the per-epoch (total, data, physics) losses as CSV."""
    if result.loss_trace is None:
        raise InvalidParamsError("No loss trace recorded; train with record_trace=True")
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    epochs = np.arange(result.loss_trace.shape[0])
    np.savetxt(file_path, np.column_stack([epochs, result.loss_trace]), delimiter=",",
               header="epoch,total,data,physics", comments="", fmt=["%d", "%.10g", "%.10g", "%.10g"])
