from carpets.cli import CarpetCommand
from carpets.hypotheses import check_generic_hypothesis, check_robust_hypotheses
from carpets.reports import timed
from carpets.validators import overlapping_rectangles, validate_geometry


class Command(CarpetCommand):
    help = 'Check the geometry of a carpet system and measure the generic and robust hypotheses'
    command_name = 'validate'

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        self.add_common_arguments(parser, tol=self.defaults['HYPOTHESIS_TOL'])
        parser.add_argument('--grid', type=int, default=self.defaults['HYPOTHESIS_GRID'],
                            help='t-grid points for the generic hypothesis')
        parser.add_argument('--eps', type=float, default=self.defaults['ROBUST_EPS'],
                            help='eps for the robust hypotheses')
        parser.add_argument('--slack', type=float, default=self.defaults['GEOMETRY_SLACK'],
                            help='Slack allowed on the geometry inequalities')

    def run(self, report, **options):
        system = self.load(options, report, validate=False)
        with timed(report.timings, 'geometry'):
            geometry = validate_geometry(system, slack=options['slack'])
        report.results['ok'] = geometry.ok
        report.results['violations'] = [
            {
                'constraint': violation.constraint,
                'location': list(violation.location),
                'value': violation.value,
                'message': violation.message,
            }
            for violation in geometry.violations
        ]
        if not geometry.ok:
            report.results.update({'overlaps': None, 'generic': None, 'robust1': None, 'robust2': None})
            report.warnings.extend(geometry.messages())
            return f'System is invalid: {len(geometry.violations)} geometry violations'

        report.results['overlaps'] = [list(overlap) for overlap in overlapping_rectangles(system)]
        with timed(report.timings, 'hypotheses'):
            generic = check_generic_hypothesis(system, grid_points=options['grid'], tol=options['tol'])
            robust1, robust2 = check_robust_hypotheses(system, options['eps'])
        report.results['generic'] = generic.summary()
        report.results['robust1'] = robust1.summary()
        report.results['robust2'] = robust2.summary()
        for hypothesis in (generic, robust1, robust2):
            if not hypothesis.passed:
                report.warnings.append(f'{hypothesis.hypothesis}: {hypothesis.verdict} ({hypothesis.detail})')
