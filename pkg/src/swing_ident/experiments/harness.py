# src/swing_ident/experiments/harness.py

"""
Sweep runner for the noise and trajectory-length experiments.

A cell is one (scenario, K, T, algorithm) combination. Every cell simulates
the scenario, draws n_runs noisy measurement sets from run seeds derived from
(base_seed, scenario, K, T, algorithm), estimates on each and averages. With
`shared_data` the algorithm drops out of the key and all algorithms of a
(scenario, K, T) point see the same measurements.
"""

import logging
import multiprocessing
import os
import time
import zlib
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from functools import lru_cache
from itertools import product
from logging.handlers import QueueHandler, QueueListener

import numpy as np
import psutil

import config
from ..console_logger import log_component_debug, log_debug, logger
from ..dynamics import NoiseSpec, add_noise, preset, simulate
from ..dynamics.swing_model import PRESET_INERTIA_DAMPING
from ..errors import ConfigError, SpecValidationError, SwingIdentError
from ..estimation import bpinn, pinn, sindy
from ..estimation.parameters import define_parameters
from .metrics import percent_error

ALGORITHMS = ('sindy', 'pinn', 'bpinn')


@dataclass(frozen=True)
class ExperimentSpec:
    scenarios: tuple
    K_grid: tuple
    T_grid: tuple
    n_runs: int = 10
    algorithms: tuple = ALGORITHMS
    base_seed: int = 0
    sample_rate: float = 10.0
    average_errors: bool = False
    full_grid: bool = False
    shared_data: bool = False
    record_runtime: bool = True
    workers: int = None
    sindy: dict = field(default_factory=dict)
    pinn: dict = field(default_factory=dict)
    bpinn: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ('scenarios', 'K_grid', 'T_grid', 'algorithms'):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.scenarios or not self.K_grid or not self.T_grid:
            raise SpecValidationError("scenarios, K_grid and T_grid must be nonempty")
        if self.n_runs < 1:
            raise SpecValidationError(f"n_runs must be >= 1, got {self.n_runs}")
        unknown = [s for s in self.scenarios if s not in PRESET_INERTIA_DAMPING]
        if unknown:
            raise SpecValidationError(f"Unknown scenarios {unknown}; expected a subset of {sorted(PRESET_INERTIA_DAMPING)}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise SpecValidationError(f"Unknown algorithms {bad}; expected a subset of {list(ALGORITHMS)}")
        for K in self.K_grid:
            NoiseSpec(K)
        if min(self.T_grid) <= 0 or self.sample_rate <= 0:
            raise SpecValidationError("Trajectory lengths and the sample rate must be positive")
        if self.workers is not None and self.workers < 1:
            raise SpecValidationError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def from_dict(cls, data):
        """Builds an ExperimentSpec from a config document whose keys mirror the field names."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown experiment config keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid experiment config: {e}") from e

    @classmethod
    def noise_default(cls, **overrides):
        exp = define_parameters()['experiment_params']
        values = dict(scenarios=exp['scenarios'], K_grid=exp['K_grid'], T_grid=exp['T_grid'],
                      n_runs=exp['n_runs'], algorithms=exp['algorithms'], base_seed=exp['base_seed'])
        values.update(overrides)
        return cls(**values)

    @classmethod
    def length_default(cls, **overrides):
        exp = define_parameters()['experiment_params']
        values = dict(scenarios=exp['scenarios'], K_grid=exp['length_K_grid'], T_grid=exp['length_T_grid'],
                      n_runs=exp['n_runs'], algorithms=exp['algorithms'], base_seed=exp['base_seed'])
        values.update(overrides)
        return cls(**values)

    def to_dict(self):
        data = {}
        for f in fields(self):
            value = getattr(self, f.name)
            data[f.name] = list(value) if isinstance(value, tuple) else value
        return data


@dataclass
class ResultRecord:
    scenario: str
    K: float
    T: float
    algorithm: str
    eps_m: float
    eps_d: float
    tau_m: float = None
    tau_d: float = None
    runtime_s: float = 0.0
    seed: int = 0
    failure: str = None

    def __post_init__(self):
        has_tau = self.tau_m is not None and self.tau_d is not None
        if has_tau != (self.algorithm == 'bpinn'):
            raise SpecValidationError(f"tau must be present exactly for bpinn records (got algorithm '{self.algorithm}')")
        for eps in (self.eps_m, self.eps_d):
            if not np.isnan(eps) and eps < 0:
                raise SpecValidationError(f"Percent errors must be >= 0, got {eps}")

    @property
    def failed(self):
        return self.failure is not None

    def sort_key(self):
        return (self.scenario, self.K, self.T, self.algorithm)


# --- Seeding ---

@dataclass(frozen=True)
class RunSeeds:
    noise: int
    estimator: int


def cell_seed_sequence(base_seed, scenario, K, T, algorithm=None):
    """Seed sequence of one cell; runs are spawned from it. `algorithm=None` keys on (scenario, K, T) only."""
    key = [int(base_seed), zlib.crc32(scenario.encode()), int(round(K * 1e6)), int(round(T * 1e3))]
    if algorithm is not None:
        key.append(zlib.crc32(algorithm.encode()))
    return np.random.SeedSequence(key)


def cell_seed(base_seed, scenario, K, T, algorithm=None):
    return int(cell_seed_sequence(base_seed, scenario, K, T, algorithm).generate_state(1)[0])


def run_seeds(base_seed, scenario, K, T, n_runs, algorithm=None):
    """
    Per-run seeds. Each run spawns two children so the measurement noise and
    the estimator initialisation draw from independent streams.
    """
    seeds = []
    for run in cell_seed_sequence(base_seed, scenario, K, T, algorithm).spawn(n_runs):
        noise, estimator = run.spawn(2)
        seeds.append(RunSeeds(noise=int(noise.generate_state(1)[0]), estimator=int(estimator.generate_state(1)[0])))
    return seeds


def seed_key(spec, algorithm):
    return None if spec.shared_data else algorithm


# --- Single estimates ---

@lru_cache(maxsize=32)
def _clean_trajectory(scenario_name, T, sample_rate):
    return simulate(preset(scenario_name), T, sample_rate)


def measurement(scenario_name, K, T, sample_rate, seed, simulated_T=None):
    """
    First T seconds of the scenario trajectory with noise level K drawn from `seed`.
    The clean run is simulated once for `simulated_T` (default T) and truncated, so
    shorter lengths are prefixes of the same trajectory. Noise scales follow the
    truncated signal.
    """
    clean = _clean_trajectory(scenario_name, max(T, simulated_T or T), sample_rate).truncate(T)
    return add_noise(clean, NoiseSpec(K, seed=seed))


def estimate_once(algorithm, traj, scenario, seed, overrides=None):
    """
    Runs one estimator on one measurement set.

    Returns:
        dict: m_hat, d_hat and, for bpinn, m_std and d_std.
    """
    overrides = overrides or {}
    params = scenario.params
    if algorithm == 'sindy':
        sindy_params = {**define_parameters()['sindy_params'], **overrides}
        coeffs = sindy.fit(traj, nu=sindy_params['nu'], max_threshold_iterations=sindy_params['max_threshold_iterations'])
        est = sindy.extract_params(coeffs, params.P, params.B, sindy_params['b_check_tolerance'])
        return {'m_hat': est.m_hat, 'd_hat': est.d_hat}
    if algorithm == 'pinn':
        result = pinn.train(traj, params.P, params.B, pinn.PinnConfig.from_params(seed=seed, **overrides))
        return {'m_hat': result.m_hat, 'd_hat': result.d_hat}
    if algorithm == 'bpinn':
        summary = bpinn.run(traj, params.P, params.B, bpinn.BpinnConfig.from_params(seed=seed, **overrides),
                            truth=(params.m, params.d))
        return {'m_hat': summary.m_mean, 'd_hat': summary.d_mean, 'm_std': summary.m_std, 'd_std': summary.d_std}
    raise SpecValidationError(f"Unknown algorithm '{algorithm}'")


def run_cell(spec, scenario_name, K, T, algorithm):
    """
    Estimates n_runs times on one cell and aggregates into a ResultRecord.
    Estimator errors become a failure marker instead of propagating.
    """
    scenario = preset(scenario_name)
    truth = np.array([scenario.params.m, scenario.params.d])
    key = seed_key(spec, algorithm)
    seeds = run_seeds(spec.base_seed, scenario_name, K, T, spec.n_runs, key)
    record_seed = cell_seed(spec.base_seed, scenario_name, K, T, key)
    overrides = getattr(spec, algorithm)
    is_bpinn = algorithm == 'bpinn'

    log_component_debug(f"Cell {scenario_name} K={K:g} T={T:g} {algorithm}: {spec.n_runs} runs", 'harness')
    estimates = []
    runtimes = []
    try:
        for seed in seeds:
            traj = measurement(scenario_name, K, T, spec.sample_rate, seed.noise, simulated_T=max(spec.T_grid))
            start = time.perf_counter()
            estimates.append(estimate_once(algorithm, traj, scenario, seed.estimator, overrides))
            runtimes.append(time.perf_counter() - start)
    except SwingIdentError as e:
        logger.warning(f"Cell {scenario_name} K={K:g} T={T:g} {algorithm} failed on run {len(estimates)}: {e}")
        nan = float('nan')
        return ResultRecord(scenario_name, K, T, algorithm, eps_m=nan, eps_d=nan,
                            tau_m=nan if is_bpinn else None, tau_d=nan if is_bpinn else None,
                            runtime_s=0.0, seed=record_seed,
                            failure=f"{type(e).__name__}: {e}")

    lam_hat = np.array([[e['m_hat'], e['d_hat']] for e in estimates])
    if spec.average_errors:
        eps = np.mean([percent_error(row, truth) for row in lam_hat], axis=0)
    else:
        eps = percent_error(lam_hat.mean(axis=0), truth)

    tau_m = tau_d = None
    if is_bpinn:
        std = np.mean([[e['m_std'], e['d_std']] for e in estimates], axis=0)
        tau_m, tau_d = (float(v) for v in std * 100.0 / truth)

    record = ResultRecord(scenario_name, K, T, algorithm, eps_m=float(eps[0]), eps_d=float(eps[1]),
                          tau_m=tau_m, tau_d=tau_d,
                          runtime_s=float(np.mean(runtimes)) if spec.record_runtime else 0.0,
                          seed=record_seed)
    log_debug(f"[HARNESS] {scenario_name} K={K:g} T={T:g} {algorithm}: eps_m = {record.eps_m:.3f}%, eps_d = {record.eps_d:.3f}%",
              'log_sweep_cells')
    return record


def _run_cell_task(task):
    return run_cell(*task)


# --- Sweep execution ---

def resolve_workers(spec, n_cells):
    workers = spec.workers or config.SWEEP_WORKERS or psutil.cpu_count(logical=False) or 1
    return max(1, min(workers, n_cells))


def _attach_queue_handler(log_queue):
    if log_queue is not None and not any(isinstance(h, QueueHandler) for h in logger.handlers):
        logger.addHandler(QueueHandler(log_queue))


def execute_cells(spec, cells, log_queue=None):
    """
    Runs the cells on a process pool (or inline for a single worker) and returns
    the records sorted by (scenario, K, T, algorithm).
    """
    tasks = [(spec, s, K, T, a) for s, K, T, a in cells]
    if not tasks:
        return []
    workers = resolve_workers(spec, len(tasks))
    logger.info(f"Running {len(tasks)} sweep cells on {workers} worker(s)")
    if workers == 1:
        records = [_run_cell_task(t) for t in tasks]
    else:
        with multiprocessing.Pool(workers, initializer=_attach_queue_handler, initargs=(log_queue,)) as pool:
            records = list(pool.imap_unordered(_run_cell_task, tasks))
    failed = sum(r.failed for r in records)
    if failed:
        logger.warning(f"{failed} of {len(records)} sweep cells failed")
    return sorted(records, key=ResultRecord.sort_key)


def run_noise_sweep(spec, log_queue=None):
    """Every scenario x K x T x algorithm combination."""
    cells = product(spec.scenarios, spec.K_grid, spec.T_grid, spec.algorithms)
    return execute_cells(spec, list(cells), log_queue)


def run_length_sweep(spec, log_queue=None):
    """
    Paired (K, T) rows, or the full K x T grid when `full_grid` is set. Shorter
    trajectories are prefixes of the same simulation.
    """
    if spec.full_grid:
        pairs = list(product(spec.K_grid, spec.T_grid))
    else:
        if len(spec.K_grid) != len(spec.T_grid):
            raise SpecValidationError(f"Length sweep needs paired grids, got {len(spec.K_grid)} noise levels and {len(spec.T_grid)} lengths")
        pairs = list(zip(spec.K_grid, spec.T_grid))
    cells = [(s, K, T, a) for s in spec.scenarios for K, T in pairs for a in spec.algorithms]
    return execute_cells(spec, cells, log_queue)


# --- Log routing for sweeps ---

class EstimationFilter(logging.Filter):
    def filter(self, record):
        normalized_path = record.pathname.replace(os.sep, '/')
        return 'swing_ident/estimation' in normalized_path


class HarnessFilter(logging.Filter):
    def filter(self, record):
        normalized_path = record.pathname.replace(os.sep, '/')
        return 'swing_ident/experiments' in normalized_path or 'swing_ident/dynamics' in normalized_path


@contextmanager
def sweep_logging(out_dir):
    """
    Routes package log records through a multiprocessing queue into
    <out_dir>/console_out/{estimation,harness}.log. Yields the queue for the
    worker initializer.
    """
    console_out_dir = os.path.join(out_dir, "console_out")
    os.makedirs(console_out_dir, exist_ok=True)
    formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(name)s - %(message)s')

    estimation_handler = logging.FileHandler(os.path.join(console_out_dir, 'estimation.log'), mode='w')
    estimation_handler.setFormatter(formatter)
    estimation_handler.addFilter(EstimationFilter())

    harness_handler = logging.FileHandler(os.path.join(console_out_dir, 'harness.log'), mode='w')
    harness_handler.setFormatter(formatter)
    harness_handler.addFilter(HarnessFilter())

    log_queue = multiprocessing.Queue()
    listener = QueueListener(log_queue, estimation_handler, harness_handler)
    queue_handler = QueueHandler(log_queue)
    listener.start()
    logger.addHandler(queue_handler)
    try:
        yield log_queue
    finally:
        logger.removeHandler(queue_handler)
        listener.stop()
        estimation_handler.close()
        harness_handler.close()
