"""
Command-line front end.

    bmposterior heart --out out/heart --iters 20000
    bmposterior semisup --config semisup.toml --seed 3
    bmposterior flawed-demo --out out/demo

Flags override values from ``--config``. Exit status is 0 on success, 2 for
bad arguments or configuration and 1 for any other library error.
"""
import argparse
import sys

from bmposterior.__about__ import __version__
from bmposterior.exceptions import BMPosteriorException, InvalidConfiguration
from bmposterior.experiments.config import read_config_file, build_config
from bmposterior.experiments.suites import run_suite
from bmposterior.log import LoggerLevel, ConsoleLogger, FileLogger, resolve_logger

COMMANDS = {
    'heart': 'heart',
    'synthetic': 'synthetic',
    'semisup': 'semisup',
    'flawed-demo': 'flawed-joint-demo',
    'custom': 'custom',
}

_HELP = {
    'heart': 'exact vs approximate samplers on the six-variable table',
    'synthetic': 'loopy Metropolis and brief Langevin on a generated system',
    'semisup': 'sigma posterior of the semi-supervised model',
    'flawed-demo': 'implied prior of a joint model over weights and data',
    'custom': 'a single chain with the chosen method and approximator',
}

_LEVELS = {
    'debug': LoggerLevel.Debug,
    'info': LoggerLevel.Info,
    'warn': LoggerLevel.Warn,
    'error': LoggerLevel.Error,
}


def _common_arguments(parser):
    parser.add_argument('--config', help='JSON or TOML file with config fields')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--out', dest='output_dir', help='output directory')
    parser.add_argument('--iters', dest='iterations', type=int, help='iterations per chain')
    parser.add_argument('--method', choices=('metropolis', 'ratio-metropolis', 'langevin', 'pseudo-metropolis'))
    parser.add_argument('--approximator')
    parser.add_argument('--data', dest='data_path', help='contingency table CSV')
    parser.add_argument('--points', dest='points_path', help='points CSV for the semisup suite')
    parser.add_argument('--workers', type=int, help='worker processes for independent chains')
    parser.add_argument('--format', dest='chain_format', choices=('jsonl', 'avro'))
    parser.add_argument('--progress', action='store_true', default=None, help='show progress bars')
    parser.add_argument('--log-level', choices=tuple(_LEVELS), default='info')
    parser.add_argument('--log-file')


def build_parser():
    parser = argparse.ArgumentParser(prog='bmposterior',
                                     description='Approximate posterior sampling for Boltzmann machine parameters')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True
    for command in COMMANDS:
        _common_arguments(subparsers.add_parser(command, help=_HELP[command]))
    return parser


def config_from_args(args):
    file_values = read_config_file(args.config) if args.config else {}
    return build_config(file_values, experiment=COMMANDS[args.command], seed=args.seed,
                        output_dir=args.output_dir, iterations=args.iterations, method=args.method,
                        approximator=args.approximator, data_path=args.data_path, points_path=args.points_path,
                        workers=args.workers, chain_format=args.chain_format, progress=args.progress)


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = _LEVELS[args.log_level]
    logger = resolve_logger(FileLogger(level, args.log_file) if args.log_file else ConsoleLogger(level))
    try:
        config = config_from_args(args)
        result = run_suite(config)
    except InvalidConfiguration as e:
        logger.error('Invalid configuration: %s', e)
        return 2
    except BMPosteriorException as e:
        logger.error('%s failed: %s', args.command, e)
        return 1
    for flag in result.manifest.flags:
        logger.warning('Flagged: %s', flag)
    logger.info('Done, config hash %s', result.manifest.config_hash)
    return 0


if __name__ == '__main__':
    sys.exit(main())
