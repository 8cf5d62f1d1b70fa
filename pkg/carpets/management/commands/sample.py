import numpy as np

from carpets.cli import CarpetCommand, csv_ints, positive_int
from carpets.moran import RowDistribution, lambda_of, solve_t
from carpets.optimizer import DimensionOptions, dimension
from carpets.reports import timed
from carpets.sampler import (
    depth_threshold, derive_seed, pointwise_dimension_trace, sample_environment, sample_path,
)
from carpets.workers import run_ordered


class Command(CarpetCommand):
    help = 'Sample environments and paths and trace the empirical pointwise dimension'
    command_name = 'sample'
    stochastic = True

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        self.add_common_arguments(parser, tol=self.defaults['SOLVER_TOL'], threads=True)
        self.add_seed_argument(parser)
        parser.add_argument('--n', type=positive_int, default=10000, help='Path length')
        parser.add_argument('--paths', type=positive_int, default=100, help='Number of sampled paths')
        parser.add_argument('--checkpoints', type=csv_ints, default=None,
                            help='Comma-separated n values to report (default: n/100, n/10, n)')
        parser.add_argument('--distribution', choices=['optimal', 'uniform'], default='optimal',
                            help='Row distribution P: the maximiser from `dim` or uniform rows')

    def run(self, report, **options):
        system = self.load(options, report)
        n, seed = options['n'], options['seed']
        threshold = depth_threshold(system)
        checkpoints = options['checkpoints']
        if checkpoints is None:
            checkpoints = [c for c in sorted({n // 100, n // 10, n}) if c >= threshold]
        if not checkpoints or max(checkpoints) > n or min(checkpoints) < threshold:
            raise ValueError(
                f"Checkpoints must lie in [{threshold}, {n}] (approximate-square threshold to --n), "
                f"got {checkpoints}"
            )

        with timed(report.timings, 'distribution'):
            if options['distribution'] == 'optimal':
                P = dimension(system, DimensionOptions(solver_tol=options['tol'], seed=0,
                                                       threads=options['threads'])).P_star
            else:
                P = RowDistribution.uniform(system)
            t = solve_t(system, P, tol=options['tol'])
            lam = lambda_of(system, P)

        def trace(index):
            path_seed = derive_seed(seed, index)
            env = sample_environment(system, n, seed=path_seed)
            path = sample_path(system, P, env, t=t)
            return pointwise_dimension_trace(system, P, env, path, checkpoints, t=t)

        with timed(report.timings, 'sample'):
            traces = np.array(run_ordered(trace, range(options['paths']), options['threads']))

        finite = np.where(np.isfinite(traces), traces, np.nan)
        report.results.update({
            'lambda_plus_t': lam + t,
            't': t,
            'checkpoints': checkpoints,
            'median': np.nanmedian(finite, axis=0).tolist(),
            'per_path': traces[:, -1].tolist(),
        })
        if not np.isfinite(traces).all():
            report.warnings.append('some paths visited zero-probability rows')
