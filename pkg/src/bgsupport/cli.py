"""Command-line entry point: ``bgsupport <subcommand> --config cfg.json ...``.

Exit status is 0 on success, 2 for configuration or validation errors and
3 for numerical failures.
"""

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from . import bounds as bnd
from .errors import EnumerationLimitError, NumericalError
from .harness import (
    emit_aggregate,
    emit_fig1_csv,
    emit_records,
    load_config,
    run_experiment,
    trial_seed,
)
from .metrics import check_propositions
from .signal_model import estimate_rip, generate_instance

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _dump(obj):
    print(json.dumps(obj, indent=2))


def cmd_constants(args):
    cfg = load_config(args.config)
    beta_bar = args.beta_bar if args.beta_bar is not None else cfg.bounds.beta_bar
    b = bnd.BoundParams(beta=args.beta, beta_bar=beta_bar)
    prm = cfg.params
    out = {
        "Np": prm.Np,
        "snr_ratio": prm.snr_ratio,
        "event_E_prob_lower": bnd.event_E_prob_lower(prm),
        "theorem1": asdict(bnd.theorem1(prm, b)),
        "theorem2": asdict(bnd.theorem2(prm, b)),
    }
    if prm.epsilon is not None:
        out["regression_error_bound"] = bnd.regression_error_bound(prm, b, prm.epsilon)
    _dump(out)


def cmd_fig1(args):
    cfg = load_config(args.config)
    if args.steps < 1:
        raise ValueError("--steps must be at least 1")
    grid = np.linspace(args.beta_min, args.beta_max, args.steps)
    emit_fig1_csv(bnd.fig1_sweep(cfg.params, grid), args.out)


def cmd_simulate(args):
    cfg = load_config(args.config)
    result = run_experiment(cfg, workers=args.workers)
    emit_records(result.records, args.out)
    if args.aggregate:
        emit_aggregate(result.aggregate, args.aggregate)
    else:
        _dump(asdict(result.aggregate))


def cmd_verify_rip(args):
    cfg = load_config(args.config)
    inst = generate_instance(cfg.params, trial_seed(cfg.master_seed, 0))
    if args.samples:
        rng = np.random.default_rng(cfg.master_seed)
        est = estimate_rip(inst.matrix, args.level, "sampled", args.samples, rng)
    else:
        est = estimate_rip(inst.matrix, args.level, "exhaustive")
    _dump(asdict(est))


def cmd_check_propositions(args):
    cfg = load_config(args.config)
    prm = cfg.params
    inst = generate_instance(prm, args.seed)
    if args.size_i + args.size_j > prm.N:
        raise ValueError("--size-i + --size-j exceeds N")
    order = np.random.default_rng(args.seed).permutation(prm.N)
    S_i = order[: args.size_i]
    S_j = order[args.size_i : args.size_i + args.size_j]
    rip = estimate_rip(inst.matrix, args.size_i + args.size_j, "exhaustive")
    report = check_propositions(inst.matrix, S_i, S_j, prm, rip.epsilon_hat)
    _dump(report.as_dict())


def build_parser():
    parser = argparse.ArgumentParser(prog="bgsupport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="closed-form constants and probabilities")
    p.add_argument("--config", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--beta-bar", type=float)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("fig1", help="K1 and probability sweep over beta, as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--beta-min", type=float, required=True)
    p.add_argument("--beta-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("simulate", help="Monte Carlo campaign")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--aggregate")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-rip", help="RIP constant of the first trial's matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_verify_rip)

    p = sub.add_parser("check-propositions", help="near-orthogonality checks on a fresh instance")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--size-i", type=int, default=2)
    p.add_argument("--size-j", type=int, default=2)
    p.set_defaults(func=cmd_check_propositions)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, EnumerationLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
