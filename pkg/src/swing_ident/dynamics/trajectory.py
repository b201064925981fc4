# src/swing_ident/dynamics/trajectory.py

import numpy as np

from ..errors import InvalidParamsError, InsufficientDataError
from .swing_model import State

UNIFORM_GRID_TOL = 1e-12


class Trajectory:
    """
    Uniformly sampled (t, delta, omega) sequence.

    `states` is stored as an (N, 2) array with columns (delta, omega).
    """
    def __init__(self, times, states, sample_rate, grid_tol=UNIFORM_GRID_TOL):
        times = np.asarray(times, dtype=float)
        states = np.asarray(states, dtype=float)
        if times.ndim != 1 or states.shape != (times.size, 2):
            raise InvalidParamsError(f"Expected times (N,) and states (N, 2), got {times.shape} and {states.shape}")
        if times.size < 2:
            raise InsufficientDataError(f"A trajectory needs at least 2 samples, got {times.size}")
        if sample_rate <= 0:
            raise InvalidParamsError(f"Sample rate must be positive, got {sample_rate}")
        steps = np.diff(times)
        if np.max(np.abs(steps - 1.0 / sample_rate)) > grid_tol:
            raise InvalidParamsError("Trajectory times are not a uniform grid at the given sample rate")

        self.times = times
        self.states = states
        self.sample_rate = float(sample_rate)

    def __len__(self):
        return self.times.size

    @property
    def delta(self):
        return self.states[:, 0]

    @property
    def omega(self):
        return self.states[:, 1]

    @property
    def duration(self):
        return self.times[-1] - self.times[0]

    def state(self, i):
        return State(float(self.states[i, 0]), float(self.states[i, 1]))

    def with_states(self, states):
        return Trajectory(self.times.copy(), states, self.sample_rate)

    def truncate(self, T):
        """Keeps the samples with t - t0 <= T (the first T seconds)."""
        keep = (self.times - self.times[0]) <= T + 1e-9
        return Trajectory(self.times[keep], self.states[keep], self.sample_rate)

    def resample(self, sample_rate):
        """Decimates onto a coarser grid; the new period must be an integer multiple of the old one."""
        factor = self.sample_rate / sample_rate
        stride = int(round(factor))
        if stride < 1 or abs(factor - stride) > 1e-9:
            raise InvalidParamsError(f"Cannot resample {self.sample_rate} Hz to {sample_rate} Hz by decimation")
        return Trajectory(self.times[::stride], self.states[::stride], sample_rate, grid_tol=1e-9)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.sample_rate == other.sample_rate
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.states, other.states))

    def __repr__(self):
        return f"Trajectory(N={len(self)}, T={self.duration:.3f} s, rate={self.sample_rate:g} Hz)"
