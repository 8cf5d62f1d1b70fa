from carpets.cli import CarpetCommand, dimension_results, optimizer_options
from carpets.optimizer import dimension
from carpets.reports import timed


class Command(CarpetCommand):
    help = 'Compute the almost-sure Hausdorff dimension of a random carpet system'
    command_name = 'dim'

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        self.add_common_arguments(parser, tol=self.defaults['OPTIMIZER_TOL'], threads=True)
        self.add_seed_argument(parser, default=0)
        self.add_optimizer_arguments(parser)

    def run(self, report, **options):
        system = self.load(options, report)
        with timed(report.timings, 'optimize'):
            result = dimension(system, optimizer_options(options))
        report.results.update(dimension_results(result))
        report.warnings.extend(result.warnings)
