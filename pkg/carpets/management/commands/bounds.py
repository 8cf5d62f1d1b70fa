from carpets.cli import CarpetCommand
from carpets.moran import t_bounds
from carpets.reports import timed


class Command(CarpetCommand):
    help = 'Smallest and largest t(P) over all row distributions'
    command_name = 'bounds'

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        self.add_common_arguments(parser, tol=self.defaults['SOLVER_TOL'])

    def run(self, report, **options):
        system = self.load(options, report)
        with timed(report.timings, 'solve'):
            t_under, t_over = t_bounds(system, tol=options['tol'])
        report.results['t_under'] = t_under
        report.results['t_over'] = t_over
