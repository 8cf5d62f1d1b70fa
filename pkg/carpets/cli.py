"""
Command-line plumbing shared by the management commands.

`dispatch` is the entry point used by manage.py; `CarpetCommand` is the base
class every subcommand derives from (common flags, error translation, human
table on stdout, machine report through --out).
"""
import argparse
import logging
import os
import sys

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import ManagementUtility, get_commands
from django.core.management.base import BaseCommand, CommandError

from .model import load_system
from .optimizer import DimensionOptions
from .reports import RunReport, ReportError, timed, write_report
from .sampler import new_seed

logger = logging.getLogger(__name__)

SETTINGS_MODULE = 'carpet_project.settings'
USAGE_ERROR = 2
COMPUTATION_ERROR = 1
U64_MAX = 2 ** 64 - 1

# Django's own options, not echoed into reports
DJANGO_OPTIONS = {
    'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color', 'skip_checks',
    'stdout', 'stderr',
}


def dispatch(argv=None):
    """Run one subcommand; returns the process exit code (0 ok, 1 computation error, 2 usage)."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', SETTINGS_MODULE)
    argv = list(sys.argv if argv is None else argv)
    subcommand = argv[1] if len(argv) > 1 else 'help'
    if not subcommand.startswith('-') and subcommand != 'help' and subcommand not in get_commands():
        sys.stderr.write(f"Unknown command: {subcommand!r}. Type 'manage.py help' for usage.\n")
        return USAGE_ERROR
    try:
        ManagementUtility(argv).execute()
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else COMPUTATION_ERROR
    return 0


# ====================================================================
# ARGUMENT TYPES
# ====================================================================

def u64(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2^64 - 1], got {value}")
    return value


def positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def non_negative_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def csv_floats(text):
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def csv_ints(text):
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# ====================================================================
# HUMAN OUTPUT
# ====================================================================

def _cell(value, limit=8):
    if isinstance(value, float):
        return f'{value:.12g}'
    if isinstance(value, (list, tuple)):
        shown = ', '.join(_cell(item, limit) for item in value[:limit])
        more = f', ... ({len(value)} items)' if len(value) > limit else ''
        return f'[{shown}{more}]'
    if isinstance(value, dict):
        return '{' + ', '.join(f'{key}: {_cell(item, limit)}' for key, item in value.items()) + '}'
    return str(value)


def format_table(report, width=24, omit=()):
    """Fixed-width key/value table of a report's results, then warnings and timings."""
    lines = [report.command, '-' * (width * 2)]
    for key, value in report.results.items():
        if key in omit:
            continue
        lines.append(f'{key:<{width}}{_cell(value)}')
    if report.seed is not None:
        lines.append(f'{"seed":<{width}}{report.seed}')
    for phase, elapsed in report.timings.items():
        lines.append(f'{"time." + phase + " (ms)":<{width}}{elapsed:.1f}')
    for warning in report.warnings:
        lines.append(f'WARNING: {warning}')
    return '\n'.join(lines)


# ====================================================================
# BASE COMMAND
# ====================================================================

class CarpetCommand(BaseCommand):
    """
    Subcommands implement `run(report, **options)` and fill report.results.

    Domain errors (geometry, schema, bracket, invalid input) become CommandError,
    which Django turns into exit code 1.
    """
    command_name = None
    stochastic = False
    show_table = True
    # result keys left out of the stdout table (still written to --out)
    table_omit = ()

    @property
    def defaults(self):
        return settings.CARPETS

    # Flags ----------------------------------------------------------

    def add_config_argument(self, parser):
        parser.add_argument('--config', required=True, help='Carpet system config (YAML or JSON)')

    def add_common_arguments(self, parser, tol=None, threads=False):
        parser.add_argument('--out', default=None,
                            help='Write a machine-readable report (.json, .yaml or .yml)')
        if tol is not None:
            parser.add_argument('--tol', type=float, default=tol, help=f'Tolerance (default {tol:g})')
        if threads:
            parser.add_argument('--threads', type=non_negative_int, default=self.defaults['THREADS'],
                                help='Worker threads, 0 = one per CPU')

    def add_seed_argument(self, parser, default=None):
        parser.add_argument('--seed', type=u64, default=default,
                            help='64-bit seed; drawn and echoed when omitted')

    # Execution ------------------------------------------------------

    def load(self, options, report, validate=True):
        with timed(report.timings, 'load'):
            return load_system(options['config'], validate=validate)

    def resolve_seed(self, options):
        seed = options.get('seed')
        if seed is None and self.stochastic:
            seed = new_seed()
            logger.info(f'No --seed given, drew {seed}')
        return seed

    def handle(self, *args, **options):
        seed = self.resolve_seed(options)
        options['seed'] = seed
        report = RunReport(
            command=self.command_name,
            inputs={key: value for key, value in options.items() if key not in DJANGO_OPTIONS},
            seed=seed,
        )
        try:
            failure = self.run(report, **options)
        except ValidationError as e:
            raise CommandError('; '.join(e.messages))
        except (ValueError, OSError) as e:
            logger.error(f'{self.command_name} failed: {e}')
            raise CommandError(str(e))
        if self.show_table:
            self.stdout.write(format_table(report, omit=self.table_omit))
        self.finish(report, options, failure)

    def finish(self, report, options, failure=None):
        """Write --out, then fail with `failure` if the run reported one."""
        if options.get('out'):
            try:
                write_report(report, options['out'])
            except ReportError as e:
                raise CommandError(str(e))
            self.stdout.write(self.style.SUCCESS(f"Report written to {options['out']}"))
        if failure:
            raise CommandError(failure)

    def run(self, report, **options):
        """Fill report.results; may return a failure message to exit with code 1 after reporting."""
        raise NotImplementedError('subclasses of CarpetCommand must provide a run() method')

    def add_optimizer_arguments(self, parser):
        defaults = self.defaults
        parser.add_argument('--solver-tol', type=float, default=defaults['SOLVER_TOL'],
                            help='Residual tolerance of the root solves')
        parser.add_argument('--agreement-tol', type=float, default=defaults['AGREEMENT_TOL'],
                            help='Largest accepted gap between the two routes')
        parser.add_argument('--starts', type=positive_int, default=defaults['STARTS'],
                            help='Starting points of the generic ascent')
        parser.add_argument('--t-grid', type=positive_int, default=defaults['T_GRID'],
                            help='Grid points of the structural sweep')
        parser.add_argument('--hypothesis-grid', type=positive_int, default=defaults['HYPOTHESIS_GRID'],
                            help='t-grid points for the generic hypothesis')
        parser.add_argument('--hypothesis-tol', type=float, default=defaults['HYPOTHESIS_TOL'])
        parser.add_argument('--eps', type=float, default=defaults['ROBUST_EPS'],
                            help='eps for the robust hypotheses')


# ====================================================================
# OPTIMIZER PLUMBING
# ====================================================================

def optimizer_options(options):
    """DimensionOptions from parsed flags."""
    return DimensionOptions(
        tol=options['tol'],
        solver_tol=options['solver_tol'],
        agreement_tol=options['agreement_tol'],
        starts=options['starts'],
        seed=options['seed'],
        t_grid=options['t_grid'],
        hypothesis_grid=options['hypothesis_grid'],
        hypothesis_tol=options['hypothesis_tol'],
        robust_eps=options['eps'],
        threads=options['threads'],
    )


def distribution_rows(P):
    """Row weights as nested lists, one list per map."""
    return [list(block) for block in P.weights]


def dimension_results(result):
    t_under, t_over = result.diagnostics['bracket']
    structural = result.diagnostics['structural']
    return {
        'dimension': result.dimension,
        'lambda': result.lam,
        't': result.t,
        'method': str(result.method),
        't_under': t_under,
        't_over': t_over,
        'agreement_gap': result.diagnostics['agreement_gap'],
        'P_star': distribution_rows(result.P_star),
        'structural_dimension': structural['dimension'] if structural else None,
        'generic_dimension': result.diagnostics['generic']['dimension'],
        'hypotheses': result.diagnostics['hypotheses'],
    }
