from .swing_model import (
    PRESET_INERTIA_DAMPING, Scenario, State, SystemParams, equilibrium, preset, swing_rhs,
)
from .trajectory import Trajectory
from .simulate import rk4_step, simulate
from .noise import NoiseSpec, add_noise
from .trajectory_io import read_trajectory_csv, write_trajectory_csv
