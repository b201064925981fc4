# src/swing_ident/dynamics/trajectory_io.py

import os

import numpy as np

from ..console_logger import logger
from ..errors import InsufficientDataError, TrajectoryFormatError
from .trajectory import Trajectory

CSV_HEADER = "t,delta,omega"
CSV_FORMAT = "%.17g"


def write_trajectory_csv(traj, file_path):
    """Writes `t,delta,omega` rows with 17 significant digits (exact float round-trip)."""
    directory = os.path.dirname(os.path.abspath(file_path))
    os.makedirs(directory, exist_ok=True)
    table = np.column_stack([traj.times, traj.states])
    np.savetxt(file_path, table, delimiter=",", header=CSV_HEADER, comments="", fmt=CSV_FORMAT)
    logger.info(f"Trajectory with {len(traj)} samples written to {file_path}")


def read_trajectory_csv(file_path):
    """
    Reads a trajectory CSV written by `write_trajectory_csv`.

    The sample rate is recovered from the time step.
    """
    with open(file_path, 'r') as f:
        header = f.readline().strip().replace(" ", "")
    if header != CSV_HEADER:
        raise TrajectoryFormatError(f"Unexpected trajectory header '{header}' in {file_path}, expected '{CSV_HEADER}'")

    table = np.loadtxt(file_path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[0] < 2:
        raise InsufficientDataError(f"Trajectory file {file_path} holds fewer than 2 samples")
    dt = (table[-1, 0] - table[0, 0]) / (table.shape[0] - 1)
    sample_rate = float(np.round(1.0 / dt, 9))
    return Trajectory(table[:, 0], table[:, 1:3], sample_rate, grid_tol=1e-9)
