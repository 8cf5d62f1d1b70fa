import numpy as np

from carpets.cli import CarpetCommand, dimension_results, distribution_rows, optimizer_options
from carpets.optimizer import dimension
from carpets.percolation import build_percolation_system, closed_form_result
from carpets.reports import timed


class Command(CarpetCommand):
    help = 'Grid fractal percolation: closed-form dimension against the enumerated system'
    command_name = 'percolation'

    def add_arguments(self, parser):
        parser.add_argument('--k', type=int, default=2, help='Grid size (k x k), at most 4')
        parser.add_argument('--q', type=float, default=0.5, help='Square survival probability in (0, 1)')
        self.add_common_arguments(parser, tol=self.defaults['OPTIMIZER_TOL'], threads=True)
        self.add_seed_argument(parser, default=0)
        self.add_optimizer_arguments(parser)

    def run(self, report, **options):
        k, q = options['k'], options['q']
        with timed(report.timings, 'build'):
            system = build_percolation_system(k, q)
        with timed(report.timings, 'closed_form'):
            oracle = closed_form_result(system, k, q, tol=options['solver_tol'])
        with timed(report.timings, 'optimize'):
            result = dimension(system, optimizer_options(options))

        closed_form = oracle.diagnostics['closed_form']
        computed = dimension_results(result)
        report.results.update({
            'closed_form': closed_form,
            'dimension': result.dimension,
            'gap': abs(result.dimension - closed_form),
            'maps': system.m,
            'optimal_P_max_error': float(np.max(np.abs(result.P_star.flat - oracle.P_star.flat))),
            'optimal_P': distribution_rows(oracle.P_star),
            'method': computed['method'],
            't_under': computed['t_under'],
            't_over': computed['t_over'],
            'agreement_gap': computed['agreement_gap'],
        })
        report.warnings.extend(result.warnings)
