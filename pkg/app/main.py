import argparse, os, sys
from pydantic import ValidationError

from .errors import ArgumentError, ConfigError, ExitCode, OutputError
from .io.files import load_config, with_overrides
from .models import ExperimentConfig
from .pipeline import COMMANDS, cmd_verify_partitions
from .sim.seeding import THREADS_ENV, default_threads
from .util.logger import error


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Experiment config (flat key=value, YAML or JSON)')
    common.add_argument('--seed', type=int, default=None, help='Master seed (unsigned 64-bit)')
    common.add_argument('--threads', type=int, default=None,
                        help=f'Worker threads; speed only, never results (default: ${THREADS_ENV} or 1)')
    common.add_argument('--out', default=None, help='Output file (default: stdout)')
    common.add_argument('--format', choices=['csv', 'json'], default=None, help='Output format')
    common.add_argument('--expect-fail', action='store_true',
                        help='Counterexample mode: a confirmed failure exits with 3')

    parser = argparse.ArgumentParser(
        prog='cube-ou', description='Hypercube walk projections and their Ornstein-Uhlenbeck limit')
    sub = parser.add_subparsers(dest='command', required=True)
    vp = sub.add_parser('verify-partitions', parents=[common], help='Partition identities and coefficient table')
    vp.add_argument('--lmax', type=int, default=None, help='Largest ground size L (1..12)')
    sub.add_parser('verify-moments', parents=[common], help='Exact moments vs chain oracle and Monte Carlo')
    sub.add_parser('converge', parents=[common], help='Convergence sweep in d and fdd test')
    sub.add_parser('simulate', parents=[common], help='Path summaries or raw paths')
    sub.add_parser('fdd-test', parents=[common], help='Finite-dimensional distributions vs the Gaussian target')
    sub.add_parser('tightness-probe', parents=[common], help='Increment probabilities and conditional increments')
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    threads = args.threads
    if threads is None and os.getenv(THREADS_ENV):
        threads = default_threads()
    return with_overrides(cfg, {
        'run.seed': args.seed,
        'run.threads': threads,
        'output.path': args.out,
        'output.format': args.format,
        'expect_fail': True if args.expect_fail else None,
    })


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == 'verify-partitions':
            return int(cmd_verify_partitions(cfg, args.lmax))
        return int(COMMANDS[args.command](cfg))
    except (ConfigError, ValidationError, ArgumentError) as e:
        error(str(e))
        return int(ExitCode.USAGE)
    except OutputError as e:
        error(str(e))
        return int(ExitCode.IO)


def main():
    sys.exit(run())


if __name__ == '__main__':
    main()
