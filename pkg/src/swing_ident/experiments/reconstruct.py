# src/swing_ident/experiments/reconstruct.py

import os
from dataclasses import dataclass

import numpy as np

from ..console_logger import log_component_debug
from ..dynamics import State, simulate
from ..errors import InvalidParamsError
from .metrics import rmse


@dataclass
class Reconstruction:
    lambda_hat: tuple
    trajectory: object
    reference: object
    rmse: np.ndarray
    relative_omega_rmse: float

    def to_dict(self):
        return {
            'm_hat': float(self.lambda_hat[0]),
            'd_hat': float(self.lambda_hat[1]),
            'rmse_delta': float(self.rmse[0]),
            'rmse_omega': float(self.rmse[1]),
            'relative_omega_rmse': float(self.relative_omega_rmse),
        }


def reconstruct(scenario, lambda_hat, T=27.0, sample_rate=10.0, x0=None):
    """
    Re-simulates the scenario with estimated (m, d) and compares it with the
    true-parameter trajectory.

    Args:
        scenario (Scenario): True constants and initial state.
        lambda_hat (tuple): Estimated (m, d), both positive.
        T (float): Duration in seconds.
        sample_rate (float): Output rate in Hz.
        x0 (tuple, optional): Initial state; defaults to the scenario's.

    Returns:
        Reconstruction: Estimated trajectory, reference, per-state RMSE and the
            omega RMSE relative to the RMS of the reference omega signal.
    """
    m_hat, d_hat = (float(v) for v in lambda_hat)
    if not (m_hat > 0 and d_hat > 0):
        raise InvalidParamsError(f"Reconstruction needs positive estimates, got m = {m_hat}, d = {d_hat}")
    if x0 is not None:
        scenario = type(scenario)(name=scenario.name, params=scenario.params, x0=State(*x0))

    reference = simulate(scenario, T, sample_rate)
    estimated = simulate(scenario, T, sample_rate, params=scenario.params.with_lambda(m_hat, d_hat))
    errors = rmse(estimated.states, reference.states)
    signal = float(np.sqrt(np.mean(reference.omega ** 2)))
    relative = float(errors[1] / signal) if signal > 0 else float('inf')
    log_component_debug(f"Reconstruction of '{scenario.name}' with m = {m_hat:.4f}, d = {d_hat:.4f}: "
                        f"omega RMSE = {errors[1]:.3e} ({100 * relative:.2f}% of signal RMS)", 'harness')
    return Reconstruction(lambda_hat=(m_hat, d_hat), trajectory=estimated, reference=reference,
                          rmse=errors, relative_omega_rmse=relative)


def reconstruct_many(scenario, estimates, T=27.0, sample_rate=10.0):
    """One Reconstruction per (m, d) estimate, e.g. the per-run BPINN means of a cell."""
    return [reconstruct(scenario, lam, T, sample_rate) for lam in estimates]


def write_reconstruction_csv(reconstructions, file_path):
    """
    Writes t, the reference omega and one omega column per reconstruction.
    """
    if not reconstructions:
        raise InvalidParamsError("Nothing to write")
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    reference = reconstructions[0].reference
    columns = [reference.times, reference.omega] + [r.trajectory.omega for r in reconstructions]
    header = ",".join(["t", "omega_true"] + [f"omega_{i}" for i in range(len(reconstructions))])
    np.savetxt(file_path, np.column_stack(columns), delimiter=",", header=header, comments="", fmt="%.10g")
