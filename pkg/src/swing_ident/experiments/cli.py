# src/swing_ident/experiments/cli.py

import argparse
import json
import os
import sys
from datetime import datetime

import config
from ..console_logger import logger
from ..dynamics import NoiseSpec, add_noise, preset, read_trajectory_csv, simulate, write_trajectory_csv
from ..errors import ConfigError, NumericalError, ValidationError
from ..estimation import bpinn, pinn, sindy
from ..estimation.parameters import define_parameters
from .harness import ExperimentSpec, run_length_sweep, run_noise_sweep, sweep_logging
from .metrics import percent_error
from .reconstruct import reconstruct_many, write_reconstruction_csv
from .report import NumpyEncoder, emit_report, load_records


def load_scenario_constants(file_path):
    """
    Reads {"name", "P", "B", optional "m", "d"}. Returns (P, B, truth) where truth
    is (m, d) or None.
    """
    with open(file_path, 'r') as f:
        data = json.load(f)
    unknown = sorted(set(data) - {'name', 'P', 'B', 'm', 'd'})
    if unknown:
        raise ConfigError(f"Unknown scenario-constant keys: {unknown}")
    if 'P' not in data or 'B' not in data:
        raise ConfigError(f"{file_path} must define P and B")
    truth = None
    if 'm' in data and 'd' in data:
        truth = (float(data['m']), float(data['d']))
    return float(data['P']), float(data['B']), truth


def _write_json(document, out):
    text = json.dumps(document, cls=NumpyEncoder, indent=2)
    if out is None:
        print(text)
        return
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    with open(out, 'w') as f:
        f.write(text + "\n")
    logger.info(f"Result written to {out}")


# --- Subcommands ---

def cmd_simulate(args):
    sim = define_parameters()['simulation_params']
    traj = simulate(preset(args.scenario), args.duration or sim['duration_s'], args.rate or sim['sample_rate_hz'])
    traj = add_noise(traj, NoiseSpec(args.noise, seed=args.seed, allow_exploration=args.allow_exploration))
    write_trajectory_csv(traj, args.out)


def cmd_estimate(args):
    P, B, truth = load_scenario_constants(args.scenario_constants)
    traj = read_trajectory_csv(args.input)
    logger.info(f"Estimating with {args.algo} on {len(traj)} samples from {args.input}")

    if args.algo == 'sindy':
        result = sindy.estimate(traj, P, B).to_dict()
    elif args.algo == 'pinn':
        overrides = {}
        if args.epochs:
            overrides['epochs'] = args.epochs
        if args.warmup_epochs is not None:
            overrides['warmup_epochs'] = args.warmup_epochs
        result = pinn.train(traj, P, B, pinn.PinnConfig.from_params(seed=args.seed, **overrides)).to_dict()
    else:
        overrides = {}
        if args.iterations is not None:
            overrides['iterations'] = args.iterations
        if args.particles:
            overrides['n_particles'] = args.particles
        if args.warmup_epochs is not None:
            overrides['warmup_epochs'] = args.warmup_epochs
        summary = bpinn.run(traj, P, B, bpinn.BpinnConfig.from_params(seed=args.seed, **overrides), truth=truth)
        result = summary.to_dict()

    result['algorithm'] = args.algo
    if truth is not None:
        lam_hat = (result['m_mean'], result['d_mean']) if args.algo == 'bpinn' else (result['m_hat'], result['d_hat'])
        eps = percent_error(lam_hat, truth)
        result['eps_m'], result['eps_d'] = float(eps[0]), float(eps[1])
    _write_json(result, args.out)


def cmd_sweep(args):
    with open(args.config, 'r') as f:
        spec = ExperimentSpec.from_dict(json.load(f))
    if args.workers:
        spec = ExperimentSpec.from_dict({**spec.to_dict(), 'workers': args.workers})
    if args.shared_data:
        spec = ExperimentSpec.from_dict({**spec.to_dict(), 'shared_data': True})
    out_dir = args.out_dir or os.path.join(config.OUTPUT_DIRECTORY, datetime.now().strftime('%Y%m%d_%H%M%S'))
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, 'spec.json'), 'w') as f:
        json.dump(spec.to_dict(), f, indent=2)

    with sweep_logging(out_dir) as log_queue:
        runner = run_noise_sweep if args.kind == 'noise' else run_length_sweep
        records = runner(spec, log_queue)
    if not records:
        logger.info("Sweep produced no records (empty algorithm set)")
        return
    emit_report(records, out_dir, 'csv')
    emit_report(records, out_dir, 'json')


def cmd_report(args):
    records = load_records(args.in_dir)
    emit_report(records, args.out_dir or args.in_dir, args.format)


def cmd_reconstruct(args):
    scenario = preset(args.scenario)
    sim = define_parameters()['simulation_params']
    T = args.duration or sim['duration_s']
    rate = args.rate or sim['sample_rate_hz']
    estimates = [tuple(pair) for pair in args.estimate]
    results = reconstruct_many(scenario, estimates, T, rate)
    if args.out:
        write_reconstruction_csv(results, args.out)
    _write_json({'scenario': scenario.name, 'reconstructions': [r.to_dict() for r in results]}, args.summary)


def build_parser():
    parser = argparse.ArgumentParser(prog="swing-ident",
                                     description="Inertia and damping identification for the swing equation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Simulate a preset scenario and write a trajectory CSV.")
    p.add_argument("--scenario", required=True, choices=['fd1', 'fd2', 'sd1', 'sd2'])
    p.add_argument("--duration", type=float, default=None, help="Seconds (default 27).")
    p.add_argument("--rate", type=float, default=None, help="Sample rate in Hz (default 10).")
    p.add_argument("--noise", type=float, default=0.0, help="Relative noise level K, e.g. 0.01.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-exploration", action="store_true", help="Accept noise levels above 5%%.")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="Estimate (m, d) from a trajectory CSV.")
    p.add_argument("--algo", required=True, choices=['sindy', 'pinn', 'bpinn'])
    p.add_argument("--input", required=True)
    p.add_argument("--scenario-constants", required=True, help="JSON with P, B and optionally the true m, d.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None, help="PINN epochs override.")
    p.add_argument("--iterations", type=int, default=None, help="BPINN SVGD iterations override.")
    p.add_argument("--particles", type=int, default=None, help="BPINN ensemble size override.")
    p.add_argument("--warmup-epochs", type=int, default=None, help="Data-only warm-up epochs override (PINN and BPINN).")
    p.add_argument("--out", default=None, help="JSON output path (stdout if omitted).")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="Run a noise or length sweep from a JSON experiment config.")
    p.add_argument("--kind", required=True, choices=['noise', 'length'])
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--shared-data", action="store_true", help="All algorithms of a (scenario, K, T) point see the same measurements.")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="Re-emit the report of a finished sweep.")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--format", choices=['csv', 'json'], default='csv')
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reconstruct", help="Re-simulate a scenario with estimated parameters.")
    p.add_argument("--scenario", required=True, choices=['fd1', 'fd2', 'sd1', 'sd2'])
    p.add_argument("--estimate", required=True, nargs=2, type=float, action="append", metavar=("M", "D"))
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--out", default=None, help="CSV of the reconstructed omega traces.")
    p.add_argument("--summary", default=None, help="JSON summary path (stdout if omitted).")
    p.set_defaults(func=cmd_reconstruct)

    return parser


def main(argv=None):
    """Parses arguments, runs the subcommand and returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ValidationError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return ValidationError.exit_code
    except NumericalError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return NumericalError.exit_code
    except OSError as e:
        # unreadable inputs and unwritable destinations are invalid arguments
        logger.error(f"I/O error: {e}")
        return ValidationError.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
