# src/swing_ident/dynamics/swing_model.py

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParamsError, NoEquilibriumError

# --- Evaluation scenarios: name -> (m, d) in p.u. ---
# All presets share B = 0.2, P = 0.1 and start at rest in the origin.
PRESET_INERTIA_DAMPING = {
    'fd1': (0.3, 0.15),
    'fd2': (0.6, 0.3),
    'sd1': (1.4, 1.1),
    'sd2': (1.7, 1.4),
}
PRESET_B = 0.2
PRESET_P = 0.1


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the swing equation (all p.u.)."""
    m: float
    d: float
    B: float
    P: float

    def __post_init__(self):
        values = (self.m, self.d, self.B, self.P)
        if not all(math.isfinite(v) for v in values):
            raise InvalidParamsError(f"System parameters must be finite, got {values}")
        if self.m <= 0:
            raise InvalidParamsError(f"Inertia m must be positive, got {self.m}")
        if self.B <= 0:
            raise InvalidParamsError(f"Susceptance B must be positive, got {self.B}")
        if self.d < 0:
            raise InvalidParamsError(f"Damping d cannot be negative, got {self.d}")

    def with_lambda(self, m, d):
        """Returns a copy with the identifiable parameters replaced."""
        return SystemParams(m=float(m), d=float(d), B=self.B, P=self.P)


@dataclass(frozen=True)
class State:
    """Rotor angle delta (rad) and frequency deviation omega (rad/s)."""
    delta: float
    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.omega)):
            raise InvalidParamsError(f"State must be finite, got ({self.delta}, {self.omega})")

    def as_array(self):
        return np.array([self.delta, self.omega], dtype=float)


@dataclass(frozen=True)
class Scenario:
    name: str
    params: SystemParams
    x0: State = field(default_factory=lambda: State(0.0, 0.0))

    @classmethod
    def custom(cls, m, d, B=PRESET_B, P=PRESET_P, x0=(0.0, 0.0), name='custom'):
        return cls(name=name, params=SystemParams(m=m, d=d, B=B, P=P), x0=State(*x0))


def preset(name):
    """
    Looks up one of the four evaluation scenarios.

    Args:
        name (str): One of 'fd1', 'fd2', 'sd1', 'sd2'.

    Returns:
        Scenario: The scenario with B=0.2, P=0.1 and x0=(0, 0).
    """
    key = name.lower()
    if key not in PRESET_INERTIA_DAMPING:
        raise InvalidParamsError(f"Unknown scenario '{name}'. Expected one of {sorted(PRESET_INERTIA_DAMPING)}")
    m, d = PRESET_INERTIA_DAMPING[key]
    return Scenario(name=key, params=SystemParams(m=m, d=d, B=PRESET_B, P=PRESET_P), x0=State(0.0, 0.0))


def swing_rhs(state, params):
    """
    Right-hand side of the swing equation.

        d(delta)/dt = omega
        d(omega)/dt = (P - d*omega - B*sin(delta)) / m

    Args:
        state (State or array-like): (delta, omega). Arrays of shape (..., 2) are
            evaluated element-wise.
        params (SystemParams): Physical constants.

    Returns:
        np.ndarray: (d(delta)/dt, d(omega)/dt) with the same leading shape as the input.
    """
    x = state.as_array() if isinstance(state, State) else np.asarray(state, dtype=float)
    delta = x[..., 0]
    omega = x[..., 1]
    omega_dot = (params.P - params.d * omega - params.B * np.sin(delta)) / params.m
    return np.stack([omega, omega_dot], axis=-1)


def equilibrium(params):
    """
    Analytic fixed point of the swing equation, (asin(P/B), 0).

    Raises:
        NoEquilibriumError: If |P/B| > 1 (loss of synchronism).
    """
    ratio = params.P / params.B
    if abs(ratio) > 1.0:
        raise NoEquilibriumError(f"No equilibrium: |P/B| = {abs(ratio):.4f} > 1")
    return State(delta=math.asin(ratio), omega=0.0)
