"""Command-line interface.

::

    varbench run EXPERIMENT.properties [-D key=value ...] [--jobs N]
    varbench validate EXPERIMENT.properties
    varbench inspect-cache DIR
    varbench unpack ARCHIVE DIR

Exit codes: 0 success, 1 configuration error, 2 extraction error, 3 analysis
error, 4 IO error, 64 usage error.
"""

from pathlib import Path
import argparse
import json
import logging
import sys

from varbench import __version__
from varbench.cache import inspect_cache
from varbench.config import load_config_file
from varbench.exceptions import VarbenchError
from varbench.pipeline import graph_for
from varbench.util import LOG_FORMAT, LOG_LEVELS

logger = logging.getLogger(__name__)

__all__ = ['main', 'EX_USAGE']

EX_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f'{self.prog}: error: {message}\n')


def _parser():
    parser = _Parser(prog='varbench', description='Run variability '
                     'analyses of C-preprocessor product lines.')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    parser.add_argument('--log-level', choices=sorted(LOG_LEVELS),
                        default='warn', help='stderr log level')
    sub = parser.add_subparsers(dest='command', required=True,
                                parser_class=_Parser)

    def experiment(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument('config', type=str, help='experiment properties file')
        p.add_argument('-D', dest='overrides', action='append', default=[],
                       metavar='KEY=VALUE', help='override a configuration '
                       'value (repeatable)')
        p.add_argument('--jobs', type=int, help='worker processes')
        p.add_argument('--output-dir', type=str, help='result directory')
        p.add_argument('--log-level', dest='run_log_level',
                       choices=sorted(LOG_LEVELS), help='log level of '
                       'stderr and run.log')
        return p

    run = experiment('run', 'run an experiment')
    run.add_argument('--archive', action='store_true',
                     help='archive the run afterwards')
    experiment('validate', 'check a configuration and print its pipeline')

    p = sub.add_parser('inspect-cache', help='summarize a cache directory')
    p.add_argument('directory', type=str)

    p = sub.add_parser('unpack', help='verify and extract an archive')
    p.add_argument('archive', type=str)
    p.add_argument('directory', type=str)
    return parser


def _overrides(args):
    """Flag values as ``(key, value)`` pairs; flags win over ``-D``."""
    pairs = list(args.overrides)
    if args.jobs is not None:
        pairs.append(('jobs', str(args.jobs)))
    if args.output_dir is not None:
        pairs.append(('output_dir', str(Path(args.output_dir).resolve())))
    if getattr(args, 'archive', False):
        pairs.append(('archive', 'true'))
    if args.run_log_level is not None:
        pairs.append(('log.level', args.run_log_level))
    return pairs


def _stderr_handler(level):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.setLevel(LOG_LEVELS[level])
    root = logging.getLogger('varbench')
    handler.previous_level = root.level
    root.addHandler(handler)
    root.setLevel(min(root.level or logging.WARNING, LOG_LEVELS[level]))
    return handler


def _run(args):
    from varbench.runtime import run
    config = load_config_file(args.config, _overrides(args))
    report = run(config)
    for name in report.outputs:
        print(config.path('output_dir') / name)
    if report.archive:
        print(report.archive)
    if not report.ok:
        print(f'varbench: {report.failed_component or "run"}: '
              f'{report.error}', file=sys.stderr)
    return report.exit_code


def _validate(args):
    config = load_config_file(args.config, _overrides(args))
    print(graph_for(config).describe())
    return 0


def _inspect(args):
    summary = inspect_cache(args.directory)
    if not summary:
        print(f'no caches in {args.directory}')
        return 2
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _unpack(args):
    from varbench.archive import unpack_archive
    manifest = unpack_archive(args.archive, args.directory)
    print(f'{len(manifest["files"])} files verified and extracted to '
          f'{args.directory}')
    return 0


_COMMANDS = {'run': _run, 'validate': _validate,
             'inspect-cache': _inspect, 'unpack': _unpack}


def main(argv=None):
    """Entry point of the ``varbench`` command.

    :param argv: arguments without the program name (default is
                 ``sys.argv[1:]``)
    :returns: process exit code
    """
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EX_USAGE
    handler = _stderr_handler(getattr(args, 'run_log_level', None)
                              or args.log_level)
    try:
        return _COMMANDS[args.command](args)
    except VarbenchError as e:
        print(f'varbench: {e}', file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f'varbench: {e}', file=sys.stderr)
        return 4
    finally:
        root = logging.getLogger('varbench')
        root.removeHandler(handler)
        root.setLevel(handler.previous_level)


if __name__ == '__main__':
    sys.exit(main())
