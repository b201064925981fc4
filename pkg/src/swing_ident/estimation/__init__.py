from .parameters import define_parameters
from .diffnet import NetParams, forward, grad_scalar, init_params, time_derivative
from .sindy import SindyCoefficients, SindyEstimate, extract_params, finite_diff_derivatives
from .pinn import PinnConfig, PinnResult
from .bpinn import BpinnConfig, Ensemble, Particle, PosteriorSummary
