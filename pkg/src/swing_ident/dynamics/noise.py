# src/swing_ident/dynamics/noise.py

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidNoiseError

MAX_NOISE_LEVEL = 0.05


@dataclass(frozen=True)
class NoiseSpec:
    """
    Relative noise level K and RNG seed. Levels above 5% are rejected unless
    `allow_exploration` is set.
    """
    K: float
    seed: int = 0
    allow_exploration: bool = False

    def __post_init__(self):
        if not np.isfinite(self.K) or self.K < 0:
            raise InvalidNoiseError(f"Noise level K must be >= 0, got {self.K}")
        if self.K > MAX_NOISE_LEVEL and not self.allow_exploration:
            raise InvalidNoiseError(f"Noise level K = {self.K} exceeds {MAX_NOISE_LEVEL}; set allow_exploration to override")


def noise_scales(states, K):
    """gamma_noise per state dimension: mean absolute value of that dimension times K."""
    return np.mean(np.abs(states), axis=0) * K


def add_noise(traj, spec):
    """
    Adds zero-mean Gaussian measurement noise to both state channels.

    Args:
        traj (Trajectory): Clean trajectory; gamma_noise is computed from it.
        spec (NoiseSpec): Noise level and seed.

    Returns:
        Trajectory: New trajectory on the same grid. Deterministic given the seed.
    """
    if not isinstance(spec, NoiseSpec):
        raise InvalidNoiseError(f"Expected a NoiseSpec, got {type(spec).__name__}")
    if spec.K == 0:
        return traj.with_states(traj.states.copy())

    rng = np.random.default_rng(spec.seed)
    gamma = noise_scales(traj.states, spec.K)
    noise = rng.normal(0.0, 1.0, size=traj.states.shape) * gamma
    return traj.with_states(traj.states + noise)
