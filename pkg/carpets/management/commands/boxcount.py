import math

from carpets.cli import CarpetCommand, csv_floats, positive_int
from carpets.reports import timed
from carpets.sampler import box_count_estimate, generate_approximation, sample_environment


def dyadic_scales(resolution):
    """2^-1, 2^-2, ... down to the finest power of two not below `resolution`."""
    finest = math.floor(-math.log2(resolution) + 1e-12)
    return [2.0 ** -power for power in range(1, finest + 1)]


class Command(CarpetCommand):
    help = 'Box-counting dimension of one sampled n-approximation'
    command_name = 'boxcount'
    stochastic = True

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        self.add_common_arguments(parser)
        self.add_seed_argument(parser)
        parser.add_argument('--depth', type=positive_int, default=8, help='Approximation depth n')
        parser.add_argument('--cap', type=positive_int, default=self.defaults['APPROX_CAP'],
                            help='Rectangle cap; levels above it are subsampled')
        parser.add_argument('--scales', type=csv_floats, default=None,
                            help='Comma-separated box sizes, strictly decreasing (default: dyadic)')

    def run(self, report, **options):
        system = self.load(options, report)
        depth = options['depth']
        with timed(report.timings, 'generate'):
            env = sample_environment(system, depth, seed=options['seed'])
            rects = generate_approximation(system, env, depth, cap=options['cap'])
        scales = options['scales'] or dyadic_scales(max(rects.w.max(), rects.h.max()))
        with timed(report.timings, 'count'):
            estimate = box_count_estimate(rects, scales)
        report.results.update({
            'slope': estimate.dimension,
            'r2': estimate.r2,
            'scales': estimate.scales,
            'counts': estimate.counts,
            'rectangles': len(rects),
            'truncated': rects.truncated,
        })
        if rects.truncated:
            report.warnings.append('approximation was subsampled; counts at fine scales are biased low')
