from pathlib import Path

from carpets.cli import CarpetCommand, positive_int
from carpets.render import render_svg
from carpets.reports import timed
from carpets.sampler import generate_approximation, sample_environment


class Command(CarpetCommand):
    help = 'Generate an n-approximation of one realisation, optionally rendered to SVG'
    command_name = 'approx'
    stochastic = True
    table_omit = ('records',)

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        self.add_common_arguments(parser)
        self.add_seed_argument(parser)
        parser.add_argument('--depth', type=positive_int, default=6, help='Approximation depth n')
        parser.add_argument('--cap', type=positive_int, default=self.defaults['APPROX_CAP'],
                            help='Rectangle cap; levels above it are subsampled')
        parser.add_argument('--render', default=None, help='Write the approximation as SVG to this path')
        parser.add_argument('--width-px', type=positive_int, default=self.defaults['SVG_WIDTH'],
                            help='SVG canvas width in pixels')

    def run(self, report, **options):
        system = self.load(options, report)
        depth = options['depth']
        with timed(report.timings, 'generate'):
            env = sample_environment(system, depth, seed=options['seed'])
            rects = generate_approximation(system, env, depth, cap=options['cap'])
        report.results.update({
            'depth': rects.depth,
            'count': len(rects),
            'truncated': rects.truncated,
            'render': options['render'],
            'environment': env.indices.tolist(),
            'records': list(rects.records()),
        })
        if rects.truncated:
            report.warnings.append(f'approximation truncated to {options["cap"]} rectangles per level')
        if options['render']:
            with timed(report.timings, 'render'):
                svg = render_svg(rects, width_px=options['width_px'])
                path = Path(options['render'])
                try:
                    path.write_text(svg, encoding='utf-8')
                except OSError as e:
                    raise OSError(f"Cannot write SVG to {path}: {e}") from e
