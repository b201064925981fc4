# src/swing_ident/estimation/bpinn.py

"""
Bayesian PINN. Each particle bundles the surrogate weights, log(m), log(d),
per-dimension log noise scales for the data and physics likelihoods, and the
log of the prior precision P_prec. The ensemble is evolved with SVGD on the
joint log posterior

    log p = log L_data + log L_phys + log prior

where every positive latent lives in log-space and the prior carries the
matching Jacobian terms.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, xlogy

from ..console_logger import log_component_debug, log_progress, logger
from ..errors import ConfigError, GradientOverflowError, InsufficientDataError, InvalidParamsError, TrainingDivergedError
from . import diffnet
from .optimizers import Adam, AdagradMomentum
from .parameters import define_parameters
from .pinn import lambda_least_squares, normalized_times, residual_backward, rhs_on_outputs
from .svgd import svgd_update

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
N_STATES = 2
# Latents after the network weights: log_m, log_d, log_sigma_x (2), log_sigma_h (2), log_p_prec
N_LATENTS = 7
LOG_SIGMA_INIT_BOUNDS = (np.log(1e-3), 0.0)
LAMBDA_INIT_FLOOR = 1e-2


def gamma_logpdf(x, shape, rate):
    """Gamma(shape, rate) log-density; agrees with scipy.stats.gamma.logpdf(x, a=shape, scale=1/rate)."""
    return shape * np.log(rate) - gammaln(shape) + xlogy(shape - 1.0, x) - rate * x


# --- Particle layout ---

@dataclass(frozen=True)
class ParticleLayout:
    """Index map between a Particle and its flat SVGD vector."""
    hidden_size: int

    @property
    def n_theta(self):
        return diffnet.NetParams.zeros(self.hidden_size).size

    @property
    def dim(self):
        return self.n_theta + N_LATENTS

    @property
    def log_m(self):
        return self.n_theta

    @property
    def log_d(self):
        return self.n_theta + 1

    @property
    def log_sigma_x(self):
        return slice(self.n_theta + 2, self.n_theta + 4)

    @property
    def log_sigma_h(self):
        return slice(self.n_theta + 4, self.n_theta + 6)

    @property
    def log_p_prec(self):
        return self.n_theta + 6


@dataclass
class Particle:
    theta: diffnet.NetParams
    log_m: float
    log_d: float
    log_sigma_x: np.ndarray
    log_sigma_h: np.ndarray
    log_p_prec: float

    def __post_init__(self):
        self.log_sigma_x = np.asarray(self.log_sigma_x, dtype=float).reshape(N_STATES)
        self.log_sigma_h = np.asarray(self.log_sigma_h, dtype=float).reshape(N_STATES)
        scalars = [self.log_m, self.log_d, self.log_p_prec]
        if not (np.all(np.isfinite(scalars)) and np.all(np.isfinite(self.log_sigma_x))
                and np.all(np.isfinite(self.log_sigma_h)) and self.theta.is_finite()):
            raise InvalidParamsError("Particle coordinates must be finite")

    @property
    def m(self):
        return float(np.exp(self.log_m))

    @property
    def d(self):
        return float(np.exp(self.log_d))

    @property
    def sigma_x(self):
        return np.exp(self.log_sigma_x)

    @property
    def sigma_h(self):
        return np.exp(self.log_sigma_h)

    @property
    def p_prec(self):
        return float(np.exp(self.log_p_prec))

    @property
    def layout(self):
        return ParticleLayout(self.theta.hidden_size)

    def to_vector(self):
        return np.concatenate([
            self.theta.to_vector(),
            [self.log_m, self.log_d],
            self.log_sigma_x,
            self.log_sigma_h,
            [self.log_p_prec],
        ])

    @classmethod
    def from_vector(cls, vec, layout):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (layout.dim,):
            raise InvalidParamsError(f"Particle vector must have length {layout.dim}, got {vec.shape}")
        return cls(
            theta=diffnet.NetParams.from_vector(vec[:layout.n_theta], layout.hidden_size),
            log_m=float(vec[layout.log_m]),
            log_d=float(vec[layout.log_d]),
            log_sigma_x=vec[layout.log_sigma_x].copy(),
            log_sigma_h=vec[layout.log_sigma_h].copy(),
            log_p_prec=float(vec[layout.log_p_prec]),
        )


@dataclass
class Ensemble:
    particles: list
    iteration: int = 0

    def __post_init__(self):
        if len(self.particles) < 1:
            raise InvalidParamsError("An ensemble needs at least one particle")
        hidden = {p.theta.hidden_size for p in self.particles}
        if len(hidden) != 1:
            raise InvalidParamsError(f"Particles differ in hidden size: {sorted(hidden)}")

    def __len__(self):
        return len(self.particles)

    @property
    def layout(self):
        return self.particles[0].layout

    def as_matrix(self):
        return np.stack([p.to_vector() for p in self.particles])

    @classmethod
    def from_matrix(cls, X, layout, iteration=0):
        return cls([Particle.from_vector(row, layout) for row in X], iteration=iteration)

    def lambdas(self):
        """(n, 2) array of (m, d) per particle."""
        return np.array([[p.m, p.d] for p in self.particles])


@dataclass(frozen=True)
class Collocation:
    """Normalized physics-residual times and the normalization length T."""
    t_norm: np.ndarray
    T: float

    @classmethod
    def from_dataset(cls, dataset, n_points=0):
        """Measurement stamps when n_points is 0, else n_points uniform times on [0, 1]."""
        t_norm, T = normalized_times(dataset)
        if n_points:
            t_norm = np.linspace(0.0, 1.0, int(n_points))
        return cls(t_norm=t_norm, T=T)


@dataclass(frozen=True)
class PriorConfig:
    lambda_mean: float = 1.0
    lambda_scale_numerator: float = 5.0
    prec_shape: float = 1.0
    prec_rate: float = 0.1
    noise_prec_shape: float = 1.0
    noise_prec_rate: float = 0.1

    def __post_init__(self):
        if min(self.lambda_scale_numerator, self.prec_shape, self.prec_rate,
               self.noise_prec_shape, self.noise_prec_rate) <= 0:
            raise ConfigError("Prior scales, shapes and rates must be positive")

    @classmethod
    def from_params(cls, params=None):
        params = define_parameters() if params is None else params
        return cls(**params['prior_params'])


@dataclass
class BpinnConfig:
    n_particles: int = 30
    iterations: int = 3000
    stepsize: float = 1e-3
    warmup_epochs: int = 20000
    warmup_learning_rate: float = 1e-2
    decay_every: int = 1000
    decay_factor: float = 0.5
    preconditioner: str = 'adagrad'
    adagrad_alpha: float = 0.9
    adagrad_fudge: float = 1e-6
    bandwidth_floor: float = 1e-6
    max_backoffs: int = 5
    log_every: int = 500
    snapshot_every: int = 0
    n_collocation: int = 0
    hidden_size: int = 10
    seed: int = 0
    prior: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        if self.n_particles < 1:
            raise ConfigError(f"n_particles must be >= 1, got {self.n_particles}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.stepsize <= 0:
            raise ConfigError(f"stepsize must be positive, got {self.stepsize}")
        if not 0 < self.decay_factor <= 1:
            raise ConfigError(f"decay_factor must be in (0, 1], got {self.decay_factor}")
        if self.preconditioner not in ('adagrad', 'plain'):
            raise ConfigError(f"preconditioner must be 'adagrad' or 'plain', got {self.preconditioner!r}")
        if self.max_backoffs < 0:
            raise ConfigError(f"max_backoffs must be >= 0, got {self.max_backoffs}")
        if self.warmup_epochs < 0 or self.warmup_learning_rate <= 0:
            raise ConfigError("warmup_epochs must be >= 0 and warmup_learning_rate positive")

    @classmethod
    def from_params(cls, params=None, **overrides):
        params = define_parameters() if params is None else params
        values = dict(params['bpinn_params'])
        values['hidden_size'] = params['network_params']['hidden_size']
        values['prior'] = PriorConfig.from_params(params)
        values.update(overrides)
        return cls(**values)

    def stepsize_at(self, iteration):
        if not self.decay_every:
            return self.stepsize
        return self.stepsize * self.decay_factor ** (iteration // self.decay_every)


@dataclass
class PosteriorSummary:
    m_mean: float
    d_mean: float
    m_std: float
    d_std: float
    tau_m: float
    tau_d: float
    sigma_x_mean: np.ndarray
    mode: str = 'evaluation'
    n_particles: int = 0
    iterations: int = 0
    seed: int = 0
    ensemble: Ensemble = field(default=None, repr=False)
    snapshots: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.m_std < 0 or self.d_std < 0:
            raise InvalidParamsError("Posterior standard deviations must be >= 0")

    def to_dict(self):
        return {
            'm_mean': float(self.m_mean),
            'm_std': float(self.m_std),
            'tau_m': float(self.tau_m),
            'd_mean': float(self.d_mean),
            'd_std': float(self.d_std),
            'tau_d': float(self.tau_d),
            'sigma_x_mean': [float(s) for s in np.atleast_1d(self.sigma_x_mean)],
            'tau_mode': self.mode,
            'n_particles': int(self.n_particles),
            'iterations': int(self.iterations),
            'seed': int(self.seed),
        }


def normalized_std(std, reference):
    """tau = std * 100 / reference, in percent."""
    if reference == 0:
        raise InvalidParamsError("Cannot normalize a standard deviation by zero")
    return float(std * 100.0 / abs(reference))


def summarize(ensemble, truth=None, seed=0):
    """
    Ensemble mean, population std and tau of (m, d).

    Args:
        ensemble (Ensemble): Final particles.
        truth (tuple, optional): True (m, d). Given: evaluation mode; absent: blind
            mode, tau is taken relative to the posterior mean.
    """
    lam = ensemble.lambdas()
    mean = lam.mean(axis=0)
    std = lam.std(axis=0)
    reference = mean if truth is None else np.asarray(truth, dtype=float)
    sigma_x = np.mean([p.sigma_x for p in ensemble.particles], axis=0)
    return PosteriorSummary(
        m_mean=float(mean[0]), d_mean=float(mean[1]),
        m_std=float(std[0]), d_std=float(std[1]),
        tau_m=normalized_std(std[0], reference[0]), tau_d=normalized_std(std[1], reference[1]),
        sigma_x_mean=sigma_x, mode='blind' if truth is None else 'evaluation',
        n_particles=len(ensemble), iterations=ensemble.iteration, seed=seed, ensemble=ensemble,
    )


# --- Log densities ---

def _gaussian_loglik(residual, log_sigma):
    """Sum of per-dimension Gaussian log-densities; residual is (N, 2)."""
    var = np.exp(2.0 * log_sigma)
    return float(np.sum(-HALF_LOG_2PI - log_sigma - residual ** 2 / (2.0 * var)))


def _gaussian_loglik_grads(residual, log_sigma):
    """Returns (d/d residual, d/d log_sigma)."""
    var = np.exp(2.0 * log_sigma)
    return -residual / var, np.sum(-1.0 + residual ** 2 / var, axis=0)


def log_likelihood_data(particle, dataset, P):
    """Gaussian log-likelihood of the measurements under the particle's surrogate and sigma_x."""
    if len(dataset) == 0:
        raise InsufficientDataError("Dataset is empty")
    t_norm, _ = normalized_times(dataset)
    residual = diffnet.forward(particle.theta, t_norm, P) - dataset.states
    return _gaussian_loglik(residual, particle.log_sigma_x)


def log_likelihood_physics(particle, collocation, P, B):
    """Gaussian log-likelihood of the physics residual h(Theta, lambda) with scale sigma_h."""
    out, dot, _ = diffnet.forward_with_derivative(particle.theta, collocation.t_norm, P, collocation.T)
    h = dot - rhs_on_outputs(out, particle.m, particle.d, P, B)
    return _gaussian_loglik(h, particle.log_sigma_h)


def _lambda_prior_terms(log_lam, c, prior):
    """
    Gaussian prior of m and d with std numerator / P_prec, in log-space; returns
    (value, d/dlog_lam, d/dc). log_lam is (..., 2) and c matches its leading shape.
    """
    lam = np.exp(log_lam)
    p = np.exp(np.asarray(c, dtype=float))[..., None]
    scale = prior.lambda_scale_numerator / p
    z = (lam - prior.lambda_mean) / scale
    value = np.sum(-HALF_LOG_2PI - np.log(scale) - 0.5 * z ** 2 + log_lam, axis=-1)
    grad_log_lam = -z * lam / scale + 1.0
    grad_c = np.sum(1.0 - z ** 2, axis=-1)
    return value, grad_log_lam, grad_c


def log_prior_batch(X, layout, prior):
    """
    Log prior and its gradient for every row of an (n, dim) particle matrix.

    Returns:
        tuple: (values (n,), gradients (n, dim))
    """
    X = np.atleast_2d(X)
    grad = np.zeros_like(X)

    theta = X[:, :layout.n_theta]
    value = np.sum(-HALF_LOG_2PI - 0.5 * theta ** 2, axis=1)
    grad[:, :layout.n_theta] = -theta

    c = X[:, layout.log_p_prec]
    lam_value, g_lam, g_c = _lambda_prior_terms(X[:, [layout.log_m, layout.log_d]], c, prior)
    value = value + lam_value
    grad[:, layout.log_m] = g_lam[:, 0]
    grad[:, layout.log_d] = g_lam[:, 1]

    # Gamma hyperprior on P_prec plus the log-space Jacobian
    p = np.exp(c)
    value = value + gamma_logpdf(p, prior.prec_shape, prior.prec_rate) + c
    grad[:, layout.log_p_prec] = g_c + prior.prec_shape - prior.prec_rate * p

    # Gamma on the precisions tau = exp(-2 s); |dtau/ds| = 2 tau
    for idx in (layout.log_sigma_x, layout.log_sigma_h):
        log_sigma = X[:, idx]
        tau = np.exp(-2.0 * log_sigma)
        value = value + np.sum(gamma_logpdf(tau, prior.noise_prec_shape, prior.noise_prec_rate)
                               + np.log(2.0) - 2.0 * log_sigma, axis=1)
        grad[:, idx] = -2.0 * prior.noise_prec_shape + 2.0 * prior.noise_prec_rate * tau

    return value, grad


def _log_prior_and_grad(particle, prior):
    """Returns (log prior, gradient vector in particle layout)."""
    value, grad = log_prior_batch(particle.to_vector()[None, :], particle.layout, prior)
    return float(value[0]), grad[0]


def log_prior(particle, prior=None):
    """Joint log prior of all particle coordinates, log-space Jacobians included."""
    prior = PriorConfig() if prior is None else prior
    return _log_prior_and_grad(particle, prior)[0]


def log_posterior(particle, dataset, collocation, P, B, prior=None):
    """Unnormalized joint log posterior: data + physics + prior."""
    return (log_likelihood_data(particle, dataset, P)
            + log_likelihood_physics(particle, collocation, P, B)
            + log_prior(particle, prior))


def log_posterior_and_grad(particle, dataset, collocation, P, B, prior=None):
    """
    Value and exact gradient of `log_posterior` over every particle coordinate.

    Returns:
        tuple: (value, gradient vector in particle layout)
    """
    prior = PriorConfig() if prior is None else prior
    layout = particle.layout
    theta = particle.theta
    m, d = particle.m, particle.d

    # Data term
    t_data, T_data = normalized_times(dataset)
    out_x = diffnet.forward(theta, t_data, P)
    r = out_x - dataset.states
    ll_data = _gaussian_loglik(r, particle.log_sigma_x)
    out_adj_x, g_sigma_x = _gaussian_loglik_grads(r, particle.log_sigma_x)
    g_theta = diffnet.grad_scalar(theta, t_data, P, T_data, out_adjoint=out_adj_x)

    # Physics term
    out_h, dot_h, cache = diffnet.forward_with_derivative(theta, collocation.t_norm, P, collocation.T)
    h = dot_h - rhs_on_outputs(out_h, m, d, P, B)
    ll_phys = _gaussian_loglik(h, particle.log_sigma_h)
    h_adj, g_sigma_h = _gaussian_loglik_grads(h, particle.log_sigma_h)
    out_adj_h, dot_adj_h, g_log_m, g_log_d = residual_backward(out_h, m, d, P, B, h_adj)
    g_theta = g_theta + diffnet.grad_scalar(theta, collocation.t_norm, P, collocation.T,
                                            out_adjoint=out_adj_h, dot_adjoint=dot_adj_h, cache=cache)

    lp, grad = _log_prior_and_grad(particle, prior)
    grad[:layout.n_theta] += g_theta.to_vector()
    grad[layout.log_m] += g_log_m
    grad[layout.log_d] += g_log_d
    grad[layout.log_sigma_x] += g_sigma_x
    grad[layout.log_sigma_h] += g_sigma_h

    return ll_data + ll_phys + lp, grad


def _gaussian_loglik_batch(residual, log_sigma):
    """Per-particle Gaussian log-likelihoods and their gradients; residual is (n, N, 2), log_sigma (n, 2)."""
    var = np.exp(2.0 * log_sigma)[:, None, :]
    value = np.sum(-HALF_LOG_2PI - log_sigma[:, None, :] - residual ** 2 / (2.0 * var), axis=(1, 2))
    return value, -residual / var, np.sum(-1.0 + residual ** 2 / var, axis=1)


def log_posterior_and_grad_batch(X, layout, dataset, collocation, P, B, prior=None):
    """
    `log_posterior_and_grad` for every row of an (n, dim) particle matrix in
    one vectorized pass.

    Returns:
        tuple: (values (n,), gradients (n, dim))
    """
    prior = PriorConfig() if prior is None else prior
    X = np.atleast_2d(X)
    H = layout.hidden_size
    thetas = X[:, :layout.n_theta]
    m = np.exp(X[:, layout.log_m])[:, None]
    d = np.exp(X[:, layout.log_d])[:, None]
    log_sigma_x = X[:, layout.log_sigma_x]
    log_sigma_h = X[:, layout.log_sigma_h]

    # Data term
    t_data, T_data = normalized_times(dataset)
    out_x, _, cache_x = diffnet.forward_batch(thetas, H, t_data, P, T_data)
    ll_data, out_adj_x, g_sigma_x = _gaussian_loglik_batch(out_x - dataset.states, log_sigma_x)
    g_theta = diffnet.grad_batch(thetas, H, out_adjoint=out_adj_x, cache=cache_x)

    # Physics term
    out_h, dot_h, cache_h = diffnet.forward_batch(thetas, H, collocation.t_norm, P, collocation.T)
    h = dot_h - rhs_on_outputs(out_h, m, d, P, B)
    ll_phys, h_adj, g_sigma_h = _gaussian_loglik_batch(h, log_sigma_h)
    out_adj_h, dot_adj_h, g_log_m, g_log_d = residual_backward(out_h, m, d, P, B, h_adj)
    g_theta += diffnet.grad_batch(thetas, H, out_adjoint=out_adj_h, dot_adjoint=dot_adj_h, cache=cache_h)

    lp, grad = log_prior_batch(X, layout, prior)
    grad[:, :layout.n_theta] += g_theta
    grad[:, layout.log_m] += g_log_m
    grad[:, layout.log_d] += g_log_d
    grad[:, layout.log_sigma_x] += g_sigma_x
    grad[:, layout.log_sigma_h] += g_sigma_h

    return ll_data + ll_phys + lp, grad


# --- Initialization ---

def init_particle(rng, hidden_size, prior, seed):
    """Draws P_prec, lambda and the noise precisions from their priors; Theta from the network initializer."""
    p_prec = rng.gamma(prior.prec_shape, 1.0 / prior.prec_rate)
    lam = rng.normal(prior.lambda_mean, prior.lambda_scale_numerator / p_prec, size=2)
    lam = np.maximum(np.abs(lam), LAMBDA_INIT_FLOOR)
    noise_prec = rng.gamma(prior.noise_prec_shape, 1.0 / prior.noise_prec_rate, size=2 * N_STATES)
    log_sigma = np.clip(-0.5 * np.log(noise_prec), *LOG_SIGMA_INIT_BOUNDS)
    return Particle(
        theta=diffnet.init_params(hidden_size, seed=seed),
        log_m=float(np.log(lam[0])),
        log_d=float(np.log(lam[1])),
        log_sigma_x=log_sigma[:N_STATES],
        log_sigma_h=log_sigma[N_STATES:],
        log_p_prec=float(np.log(p_prec)),
    )


def init_ensemble(config):
    seed_seq = np.random.SeedSequence(config.seed)
    latent_seq, weight_seq = seed_seq.spawn(2)
    rng = np.random.default_rng(latent_seq)
    weight_seeds = weight_seq.generate_state(config.n_particles)
    particles = [init_particle(rng, config.hidden_size, config.prior, int(s)) for s in weight_seeds]
    return Ensemble(particles, iteration=0)


def noise_scale_mode(residual, shape, rate):
    """
    Per-dimension sigma at the conditional posterior mode given an (N, 2)
    residual under the Gamma(shape, rate) precision prior.
    """
    N = residual.shape[0]
    return np.sqrt((np.sum(residual ** 2, axis=0) + 2.0 * rate) / (N + 2.0 * shape))


def warm_start(ensemble, dataset, collocation, P, B, config):
    """
    Moves every particle next to the data before SVGD. Each surrogate gets a
    data-only Adam fit, lambda comes from least squares on the fitted surrogate
    and the noise scales sit at their conditional posterior mode. A particle
    whose fit gives no positive (m, d) keeps its prior draw of lambda.

    Returns:
        Ensemble: Warm-started particles at iteration 0.
    """
    layout = ensemble.layout
    H = layout.hidden_size
    prior = config.prior
    t_data, T_data = normalized_times(dataset)
    n_values = dataset.states.size
    X = ensemble.as_matrix()
    thetas = X[:, :layout.n_theta]
    optimizer = Adam(learning_rate=config.warmup_learning_rate)

    for epoch in range(config.warmup_epochs):
        out, _, cache = diffnet.forward_batch(thetas, H, t_data, P, T_data)
        residual = out - dataset.states
        mse = np.mean(residual ** 2, axis=(1, 2))
        if not np.all(np.isfinite(mse)):
            raise TrainingDivergedError(epoch, what="warm-up epoch")
        thetas = thetas + optimizer.step(diffnet.grad_batch(thetas, H, out_adjoint=2.0 * residual / n_values, cache=cache))
        if config.log_every and epoch % config.log_every == 0:
            log_progress('bpinn_warmup', 'epoch', epoch, 'log_bpinn_progress', data=mse.mean(), data_max=mse.max())

    X[:, :layout.n_theta] = thetas
    out_x, _, _ = diffnet.forward_batch(thetas, H, t_data, P, T_data)
    out_h, dot_h, _ = diffnet.forward_batch(thetas, H, collocation.t_norm, P, collocation.T)
    kept = 0
    for i in range(len(X)):
        lam = lambda_least_squares(out_h[i], dot_h[i], P, B)
        if lam is None:
            kept += 1
        else:
            X[i, layout.log_m], X[i, layout.log_d] = np.log(lam)
        m, d = np.exp(X[i, layout.log_m]), np.exp(X[i, layout.log_d])
        h = dot_h[i] - rhs_on_outputs(out_h[i], m, d, P, B)
        X[i, layout.log_sigma_x] = np.log(noise_scale_mode(out_x[i] - dataset.states, prior.noise_prec_shape, prior.noise_prec_rate))
        X[i, layout.log_sigma_h] = np.log(noise_scale_mode(h, prior.noise_prec_shape, prior.noise_prec_rate))
    if kept:
        logger.warning(f"{kept} of {len(X)} particles gave no positive least-squares (m, d) and keep their prior draw")

    lam = np.exp(X[:, [layout.log_m, layout.log_d]])
    log_component_debug(f"Warm start after {config.warmup_epochs} epochs: m = {lam[:, 0].mean():.4f} "
                        f"(std {lam[:, 0].std():.4f}), d = {lam[:, 1].mean():.4f} (std {lam[:, 1].std():.4f})", 'bpinn')
    return Ensemble.from_matrix(X, layout, iteration=0)


# --- SVGD ---

def posterior_gradients(ensemble, dataset, collocation, P, B, prior=None):
    """Log posterior and its gradient at every particle, in particle order."""
    return log_posterior_and_grad_batch(ensemble.as_matrix(), ensemble.layout, dataset, collocation, P, B, prior)


def svgd_step(ensemble, dataset, collocation, P, B, stepsize, prior=None, preconditioner=None,
              bandwidth_floor=1e-6, gradients=None):
    """
    One SVGD update of the whole ensemble. All gradients are gathered before
    any particle moves.

    Raises:
        TrainingDivergedError: If the log posterior or its gradient is non-finite
            at the current positions.
    """
    if gradients is None:
        values, grads = posterior_gradients(ensemble, dataset, collocation, P, B, prior)
    else:
        values, grads = gradients
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(grads))):
        raise TrainingDivergedError(ensemble.iteration, what="iteration")
    X = svgd_update(ensemble.as_matrix(), grads, stepsize, preconditioner, bandwidth_floor)
    if not np.all(np.isfinite(X)):
        raise TrainingDivergedError(ensemble.iteration, what="iteration")
    return Ensemble.from_matrix(X, ensemble.layout, iteration=ensemble.iteration + 1)


def _make_preconditioner(config):
    if config.preconditioner == 'adagrad':
        return AdagradMomentum(alpha=config.adagrad_alpha, fudge=config.adagrad_fudge)
    return None


def run(dataset, P, B, config=None, truth=None):
    """
    Initializes the ensemble from the priors, warm-starts it on the data and
    evolves it with SVGD.

    Args:
        dataset (Trajectory): Measurements.
        P, B (float): Scenario constants.
        config (BpinnConfig): Hyper-parameters; defaults from `define_parameters()`.
        truth (tuple, optional): True (m, d) for evaluation-mode tau.

    Returns:
        PosteriorSummary: Posterior mean, std and tau of (m, d).
    """
    config = BpinnConfig.from_params() if config is None else config
    collocation = Collocation.from_dataset(dataset, config.n_collocation)
    ensemble = init_ensemble(config)
    if config.warmup_epochs:
        ensemble = warm_start(ensemble, dataset, collocation, P, B, config)
    preconditioner = _make_preconditioner(config)
    snapshots = []
    backoff = 1.0
    backoffs = 0
    previous = None

    log_component_debug(f"SVGD with {config.n_particles} particles of dimension {ensemble.layout.dim}, "
                        f"{config.iterations} iterations (seed {config.seed})", 'bpinn')

    while ensemble.iteration < config.iterations:
        it = ensemble.iteration
        try:
            values, grads = posterior_gradients(ensemble, dataset, collocation, P, B, config.prior)
            if config.log_every and it % config.log_every == 0:
                lam = ensemble.lambdas()
                log_progress('bpinn', 'iteration', it, 'log_bpinn_progress',
                             log_posterior=np.mean(values), m=lam[:, 0].mean(), m_std=lam[:, 0].std(),
                             d=lam[:, 1].mean(), d_std=lam[:, 1].std())
            if config.snapshot_every and it % config.snapshot_every == 0 and (not snapshots or snapshots[-1][0] != it):
                snapshots.append((it, ensemble.as_matrix()))

            previous = (ensemble, None if preconditioner is None else preconditioner.copy())
            ensemble = svgd_step(ensemble, dataset, collocation, P, B, config.stepsize_at(it) * backoff,
                                 prior=config.prior, preconditioner=preconditioner,
                                 bandwidth_floor=config.bandwidth_floor, gradients=(values, grads))
        except (TrainingDivergedError, GradientOverflowError):
            if previous is None or backoffs >= config.max_backoffs:
                raise TrainingDivergedError(it, what="iteration")
            backoffs += 1
            backoff *= 0.5
            ensemble, preconditioner = previous
            previous = None
            logger.warning(f"Non-finite log posterior at SVGD iteration {it}; step size halved (backoff {backoffs}/{config.max_backoffs})")

    # final positions must be valid too
    values, _ = posterior_gradients(ensemble, dataset, collocation, P, B, config.prior)
    if not np.all(np.isfinite(values)):
        raise TrainingDivergedError(ensemble.iteration, what="iteration")

    summary = summarize(ensemble, truth=truth, seed=config.seed)
    summary.snapshots = snapshots
    logger.info(f"BPINN finished: m = {summary.m_mean:.4f} (tau {summary.tau_m:.3f}%), "
                f"d = {summary.d_mean:.4f} (tau {summary.tau_d:.3f}%), {summary.mode} mode")
    return summary


def predict_mean(ensemble, t_norm, P):
    """Posterior predictive mean trajectory: ensemble average of the surrogate outputs, (N, 2)."""
    return np.mean([diffnet.forward(p.theta, t_norm, P) for p in ensemble.particles], axis=0)


def write_snapshots(summary, file_path):
    """Writes the recorded ensemble snapshots as JSON {iteration: [[particle vector], ...]}."""
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, 'w') as f:
        json.dump({str(it): X.tolist() for it, X in summary.snapshots}, f)
