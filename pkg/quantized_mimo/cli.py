"""Command-line interface for running experiments and the verify suite."""

import argparse
import asyncio
import json
import logging
import sys
from typing import List, Optional

from . import __version__
from .constants import EXIT_CONFIG_ERROR, EXIT_FAILURE, EXIT_OK, ExperimentKinds
from .errors import ConfigError, QuantizedMimoError
from .experiments import load_spec, run_experiment, spec_from_dict
from .utils import to_jsonable

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Subcommand name -> experiment kind
SUBCOMMANDS = {
    'sweep-rho': ExperimentKinds.SWEEP_RHO,
    'sweep-beta': ExperimentKinds.SWEEP_BETA,
    'rate-vs-snr': ExperimentKinds.RATE_VS_SNR,
    'ber-vs-snr': ExperimentKinds.BER_VS_SNR,
    'beta-table': ExperimentKinds.BETA_TABLE,
    'verify': ExperimentKinds.VERIFY,
}

# Kinds that can run without a config file
_CONFIG_OPTIONAL = (ExperimentKinds.BETA_TABLE, ExperimentKinds.VERIFY)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='quantized-mimo',
        description='Quantized massive MIMO downlink experiments.',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, kind in SUBCOMMANDS.items():
        sub = subparsers.add_parser(name, help=f'Run a {kind} experiment')
        sub.add_argument('--config', required=kind not in _CONFIG_OPTIONAL,
                         help='YAML experiment file')
        sub.add_argument('--out', help='Output path (CSV, or JSON for verify)')
        sub.add_argument('--seed', type=int, help='Master seed')
        sub.add_argument('--trials', type=int, help='Channel realizations per sweep point')
        sub.add_argument('--full', action='store_true',
                         help='Publication-quality trial and symbol counts')
        sub.add_argument('--workers', type=int, default=1,
                         help='Worker processes per Monte-Carlo simulation')
        sub.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    return parser


def _load(args: argparse.Namespace, kind: str):
    overrides = dict(seed=args.seed, trials=args.trials, full=args.full, out=args.out, kind=kind)
    if args.config:
        return load_spec(args.config, **overrides)
    return spec_from_dict({'kind': kind, 'name': kind}, **overrides)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the command line.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:].

    Returns:
        Process exit status: 0 on success, 1 on failed checks or experiments,
        2 on configuration errors.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    kind = SUBCOMMANDS[args.command]

    if args.workers < 1:
        logger.error("--workers must be at least 1, got %d", args.workers)
        return EXIT_CONFIG_ERROR

    try:
        spec = _load(args, kind)
        rows = asyncio.run(run_experiment(spec, workers=args.workers))
    except ConfigError as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG_ERROR
    except QuantizedMimoError as e:
        logger.error("%s", e)
        return EXIT_FAILURE

    if kind == ExperimentKinds.VERIFY:
        passed = all(check['passed'] for check in rows)
        report = {'passed': passed, 'seed': spec.base.seed, 'checks': rows}
        sys.stdout.write(json.dumps(to_jsonable(report), indent=2, sort_keys=True) + '\n')
        logger.info("verify: %d/%d checks passed", sum(c['passed'] for c in rows), len(rows))
        return EXIT_OK if passed else EXIT_FAILURE

    logger.info("%s finished with %d rows", spec.name, len(rows))
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
