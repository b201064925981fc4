# src/swing_ident/dynamics/simulate.py

import math

import numpy as np

from ..console_logger import log_component_debug, log_debug
from ..errors import IntegrationDivergedError, InvalidParamsError
from .swing_model import swing_rhs
from .trajectory import Trajectory

DEFAULT_MAX_STEP = 1e-3  # s


def rk4_step(x, params, h):
    """
    One classic 4th-order Runge-Kutta step of the swing equation.

    Args:
        x (np.ndarray): State (delta, omega).
        params (SystemParams): Physical constants.
        h (float): Step size in seconds.

    Returns:
        np.ndarray: State after one step.
    """
    k1 = swing_rhs(x, params)
    k2 = swing_rhs(x + 0.5 * h * k1, params)
    k3 = swing_rhs(x + 0.5 * h * k2, params)
    k4 = swing_rhs(x + h * k3, params)
    return x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def internal_step(sample_rate, max_step=DEFAULT_MAX_STEP):
    """Largest step <= max_step that divides the sample period exactly."""
    period = 1.0 / sample_rate
    substeps = max(1, math.ceil(period / max_step - 1e-9))
    return period / substeps, substeps


def simulate(scenario, T, sample_rate, max_step=DEFAULT_MAX_STEP, params=None):
    """
    Integrates the swing equation with fixed-step RK4 and samples it on a uniform grid.

    Args:
        scenario (Scenario): Initial state and (true) physical constants.
        T (float): Duration in seconds. Samples are taken at i / sample_rate for t <= T.
        sample_rate (float): Output sampling frequency in Hz.
        max_step (float): Upper bound for the internal integration step.
        params (SystemParams, optional): Overrides scenario.params (used for reconstruction).

    Returns:
        Trajectory: Sampled trajectory whose first sample equals x0.
    """
    if T <= 0:
        raise InvalidParamsError(f"Duration must be positive, got {T}")
    if sample_rate <= 0:
        raise InvalidParamsError(f"Sample rate must be positive, got {sample_rate}")
    params = scenario.params if params is None else params

    h, substeps = internal_step(sample_rate, max_step)
    n_samples = int(math.floor(T * sample_rate + 1e-9)) + 1
    times = np.arange(n_samples) / sample_rate
    states = np.empty((n_samples, 2))

    x = scenario.x0.as_array()
    states[0] = x
    log_component_debug(f"Simulating '{scenario.name}' for {T} s at {sample_rate} Hz, h = {h:.2e} s", 'simulator')

    for i in range(1, n_samples):
        for j in range(substeps):
            x = rk4_step(x, params, h)
            if not np.all(np.isfinite(x)):
                raise IntegrationDivergedError(times[i - 1] + (j + 1) * h)
        states[i] = x
        log_debug(f"[SIMULATOR] t = {times[i]:.3f}: delta = {x[0]:.6f}, omega = {x[1]:.6f}", 'log_integration_samples')

    return Trajectory(times, states, sample_rate)
