"""
Maximisation of λ(P) + t(P) over all row distributions.

Two independent routes:
- structural: sweep the one-parameter family P(t) over (t_under, t_over) and
  refine the best grid point with golden-section search
- generic: exponentiated-gradient ascent on the product of scaled simplices,
  multi-start, finite-difference gradients

`dimension` runs both and cross-checks them.
"""
from dataclasses import dataclass, field
import logging
import math
import time

import numpy as np
from django.db import models
from scipy.optimize import minimize_scalar

from .hypotheses import (
    HYPOTHESIS_GRID, HYPOTHESIS_TOL, Verdict, check_generic_hypothesis, check_robust_hypotheses,
)
from .moran import (
    SOLVER_TOL, BracketError, RowDistribution, entropy_lambda, family_P, family_residual,
    gamma_residual, lambda_many, lambda_of, segment_logsumexp, solve_t, solve_t_many,
    structural_point, t_bounds,
)
from .workers import run_ordered

logger = logging.getLogger(__name__)

OPTIMIZER_TOL = 1e-10
AGREEMENT_TOL = 1e-4
STARTS = 16
T_GRID = 64
ROBUST_EPS = 0.05
FD_STEP = 1e-6
GRADIENT_TOL = 1e-6
MAX_ASCENT_ITERATIONS = 2000
ETA_START = 1.0
ETA_GROWTH = 1.5
ETA_FLOOR = 1e-12
WEIGHT_FLOOR = 1e-14
STALL_ITERATIONS = 25


class Method(models.TextChoices):
    STRUCTURAL = 'structural', 'Parametric family sweep'
    GENERIC = 'generic', 'Multi-start exponentiated gradient'
    CLOSED_FORM = 'closed_form', 'Closed-form formula'


@dataclass(frozen=True)
class DimensionResult:
    """
    One evaluation of sup_P {λ(P) + t(P)}.

    dimension == lam + t; P_star attains it (t = t(P_star), lam = λ(P_star)).
    """
    dimension: float
    lam: float
    t: float
    P_star: RowDistribution
    method: str
    diagnostics: dict = field(default_factory=dict)
    warnings: tuple = ()


@dataclass(frozen=True)
class DimensionOptions:
    tol: float = OPTIMIZER_TOL
    solver_tol: float = SOLVER_TOL
    agreement_tol: float = AGREEMENT_TOL
    starts: int = STARTS
    seed: int = 0
    t_grid: int = T_GRID
    hypothesis_grid: int = HYPOTHESIS_GRID
    hypothesis_tol: float = HYPOTHESIS_TOL
    robust_eps: float = ROBUST_EPS
    max_iter: int = MAX_ASCENT_ITERATIONS
    threads: int = 1


def objective(system, P, tol=SOLVER_TOL):
    """λ(P) + t(P)."""
    return lambda_of(system, P) + solve_t(system, P, tol=tol)


def random_distribution(system, rng):
    """Feasible P with each map's rows drawn from a flat Dirichlet, scaled by p_i."""
    layout = system.layout
    blocks = [
        p * rng.dirichlet(np.ones(count))
        for p, count in zip(layout.env_probs, np.diff(layout.row_offsets))
    ]
    return RowDistribution.from_flat(system, np.concatenate(blocks))


def uniform_grid_dimension(row_counts, n_h, n_v):
    """
    Closed form for a deterministic grid carpet.

    Rows of height 1/n_v holding row_counts[j] cells of width 1/n_h, n_h ≥ n_v:
    log_{n_v} Σ_j row_counts[j] ** log_{n_h} n_v.
    """
    if n_h < n_v:
        raise ValueError(f"Grid carpet needs n_h >= n_v, got n_h={n_h}, n_v={n_v}")
    exponent = math.log(n_v) / math.log(n_h)
    return math.log(sum(count ** exponent for count in row_counts)) / math.log(n_v)


def _result_from_P(system, P, method, tol, diagnostics, warnings=()):
    t = solve_t(system, P, tol=tol)
    lam = lambda_of(system, P)
    return DimensionResult(
        dimension=lam + t, lam=lam, t=t, P_star=P, method=method,
        diagnostics=diagnostics, warnings=tuple(warnings),
    )


# ====================================================================
# STRUCTURAL ROUTE
# ====================================================================

def chebyshev_nodes(lo, hi, count):
    """Chebyshev points of the first kind in (lo, hi), ascending."""
    k = np.arange(count)
    nodes = 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * (2 * k + 1) / (2 * count))
    return np.sort(nodes)


def _structural_value(system, t, solver_tol):
    """h(t) = λ(t) + t, or NaN with the error text when the family solve fails."""
    try:
        point = structural_point(system, t, tol=solver_tol)
    except BracketError as e:
        return math.nan, str(e)
    return point.lam + t, None


def _local_maxima(ts, values):
    maxima = []
    for k, value in enumerate(values):
        if not math.isfinite(value):
            continue
        left = values[k - 1] if k > 0 else -math.inf
        right = values[k + 1] if k + 1 < len(values) else -math.inf
        left = left if math.isfinite(left) else -math.inf
        right = right if math.isfinite(right) else -math.inf
        if value >= left and value >= right:
            maxima.append((float(ts[k]), float(value)))
    return maxima


def _degenerate_structural(system, t_under, t_over, solver_tol):
    """t(P) is constant: maximise λ alone on the α = 0 slice."""
    t_star = t_under
    lam = entropy_lambda(system, tol=solver_tol)
    P = family_P(system, 0.0, lam, t_star).P
    logger.info(f'Degenerate t-bracket [{t_under:.12g}, {t_over:.12g}]; fixed-t lambda={lam:.12g}')
    return _result_from_P(
        system, P, Method.STRUCTURAL, solver_tol,
        diagnostics={
            'bracket': [t_under, t_over],
            'degenerate': True,
            'iterations': 0,
            'residuals': {'G': gamma_residual(system, 0.0, lam, t_star)},
            'local_maxima': [],
        },
    )


def maximize_structural(system, tol=OPTIMIZER_TOL, grid_points=T_GRID, solver_tol=SOLVER_TOL,
                        threads=1):
    """
    sup_t {λ(t) + t} along the family P(t) with t(P(t)) = t.

    Chebyshev grid over (t_under, t_over), then golden-section search around the
    best node down to `tol` in t. Grid nodes whose family solve fails are skipped
    and reported. Falls back to the fixed-t λ maximisation when t_under = t_over.
    """
    started = time.perf_counter()
    t_under, t_over = t_bounds(system, tol=solver_tol)
    if t_over - t_under <= tol:
        return _degenerate_structural(system, t_under, t_over, solver_tol)

    ts = chebyshev_nodes(t_under, t_over, grid_points)
    evaluations = run_ordered(lambda t: _structural_value(system, t, solver_tol), ts, threads)
    values = np.array([value for value, _ in evaluations])
    failures = [(float(t), error) for t, (_, error) in zip(ts, evaluations) if error]
    warnings = []
    if failures:
        warnings.append(f'structural solve failed at {len(failures)} of {grid_points} grid points')
        logger.warning(f'{warnings[-1]}; first failure at t={failures[0][0]:.6g}: {failures[0][1]}')
    if not np.isfinite(values).any():
        raise BracketError(
            f"Structural solve failed on every grid point in ({t_under:.6g}, {t_over:.6g})",
            t_under=t_under, t_over=t_over,
        )

    best = int(np.nanargmax(values))
    best_t, best_h = float(ts[best]), float(values[best])

    def negative_h(t):
        value, _ = _structural_value(system, t, solver_tol)
        return -value if math.isfinite(value) else 0.0

    neighbours_ok = (
        0 < best < grid_points - 1
        and np.isfinite(values[best - 1]) and np.isfinite(values[best + 1])
    )
    refined = None
    if neighbours_ok:
        try:
            refined = minimize_scalar(
                negative_h, bracket=(ts[best - 1], ts[best], ts[best + 1]),
                method='golden', options={'xtol': tol},
            )
        except ValueError:
            refined = None
    if refined is None:
        lo = float(ts[best - 1]) if best > 0 else t_under + 0.5 * (ts[0] - t_under)
        hi = float(ts[best + 1]) if best < grid_points - 1 else t_over - 0.5 * (t_over - ts[-1])
        refined = minimize_scalar(negative_h, bounds=(lo, hi), method='bounded',
                                  options={'xatol': tol})

    if -refined.fun > best_h:
        best_t, best_h = float(refined.x), float(-refined.fun)

    point = structural_point(system, best_t, tol=solver_tol)
    elapsed = (time.perf_counter() - started) * 1000
    result = _result_from_P(
        system, point.P, Method.STRUCTURAL, solver_tol,
        diagnostics={
            'bracket': [t_under, t_over],
            'degenerate': False,
            'iterations': int(refined.nfev),
            'residuals': {
                'F': family_residual(system, point.alpha, point.lam, best_t),
                'G': gamma_residual(system, point.alpha, point.lam, best_t),
            },
            'alpha': point.alpha,
            't_family': best_t,
            'local_maxima': _local_maxima(ts, values),
            'grid_failures': failures,
            'elapsed_ms': elapsed,
        },
        warnings=warnings,
    )
    logger.info(
        f'Structural route: dimension={result.dimension:.12g} at t={result.t:.12g} '
        f'(alpha={point.alpha:.6g}, {elapsed:.0f} ms)'
    )
    return result


# ====================================================================
# GENERIC ROUTE
# ====================================================================

@dataclass(frozen=True)
class AscentRun:
    weights: np.ndarray
    value: float
    iterations: int
    gap: float
    converged: bool


def _batch_objective(system, weights):
    return lambda_many(system, weights) + solve_t_many(system, weights)


def _gradient(system, weights, step):
    """Central differences of λ + t, one shifted pair per coordinate, solved as one batch."""
    n = len(weights)
    steps = np.minimum(step, weights / 2)
    index = np.arange(n)
    shifted = np.tile(weights, (2 * n, 1))
    shifted[index, index] += steps
    shifted[n + index, index] -= steps
    values = _batch_objective(system, shifted)
    return (values[:n] - values[n:]) / (2 * steps)


def _stationarity_gap(layout, weights, gradient):
    """KKT residual on the scaled simplices: spread of the gradient over each map's support."""
    shares = weights / layout.row_env_probs
    mean = layout.block_sums(shares * gradient)[layout.row_map]
    excess = gradient - mean
    support = shares > 1e3 * WEIGHT_FLOOR
    return float(max(
        np.max(np.abs(excess[support]), initial=0.0),
        np.max(excess[~support], initial=0.0),
    ))


def _exponentiated_step(layout, weights, gradient, eta):
    """w <- w exp(eta g), renormalised to p_i per map in log space."""
    logits = np.log(weights) + eta * gradient
    log_norm = segment_logsumexp(logits, layout.row_offsets)
    updated = layout.row_env_probs * np.exp(logits - log_norm[layout.row_map])
    updated = np.maximum(updated, WEIGHT_FLOOR * layout.row_env_probs)
    return updated * (layout.row_env_probs / layout.block_sums(updated)[layout.row_map])


def _ascend(system, start, max_iter, step, gradient_tol, tol):
    """Ascent until the KKT gap drops below gradient_tol or STALL_ITERATIONS steps gain less than tol."""
    layout = system.layout
    weights = np.maximum(start, WEIGHT_FLOOR * layout.row_env_probs)
    value = float(_batch_objective(system, weights)[0])
    eta = ETA_START
    gap = math.inf
    iterations = 0
    converged = False
    idle = 0
    for iterations in range(1, max_iter + 1):
        gradient = _gradient(system, weights, step)
        gap = _stationarity_gap(layout, weights, gradient)
        if gap <= gradient_tol:
            converged = True
            break
        improved = False
        while eta >= ETA_FLOOR:
            candidate = _exponentiated_step(layout, weights, gradient, eta)
            candidate_value = float(_batch_objective(system, candidate)[0])
            if candidate_value > value:
                idle = idle + 1 if candidate_value - value <= tol else 0
                weights, value = candidate, candidate_value
                eta *= ETA_GROWTH
                improved = True
                break
            eta /= 2
        if not improved or idle >= STALL_ITERATIONS:
            logger.debug(f'Ascent stalled after {iterations} iterations with gap {gap:.3g}')
            break
    return AscentRun(weights=weights, value=value, iterations=iterations, gap=gap,
                     converged=converged)


def starting_points(system, starts, seed):
    """Uniform rows, rows weighted by cell count, then flat-Dirichlet draws."""
    layout = system.layout
    points = [RowDistribution.uniform(system).flat]
    counts = layout.cell_counts.astype(float)
    points.append(layout.row_env_probs * counts / layout.block_sums(counts)[layout.row_map])
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    while len(points) < starts:
        points.append(random_distribution(system, rng).flat)
    return points[:max(starts, 1)]


def maximize_generic(system, starts=STARTS, tol=OPTIMIZER_TOL, seed=0,
                     max_iter=MAX_ASCENT_ITERATIONS, step=FD_STEP, gradient_tol=GRADIENT_TOL,
                     solver_tol=SOLVER_TOL, threads=1):
    """
    Direct ascent of P ↦ λ(P) + t(P) from several starting points.

    Never raises on non-convergence: the best run is returned and the flag is
    recorded in diagnostics and warnings.
    """
    started = time.perf_counter()
    points = starting_points(system, starts, seed)
    runs = run_ordered(
        lambda start: _ascend(system, start, max_iter, step, gradient_tol, tol), points, threads,
    )
    best = max(range(len(runs)), key=lambda index: runs[index].value)
    run = runs[best]

    warnings = []
    if not run.converged:
        warnings.append(
            f'generic ascent did not reach stationarity (gap {run.gap:.3g} > {gradient_tol:g})'
        )
        logger.warning(warnings[-1])

    P = RowDistribution.from_flat(system, run.weights)
    elapsed = (time.perf_counter() - started) * 1000
    result = _result_from_P(
        system, P, Method.GENERIC, solver_tol,
        diagnostics={
            'iterations': run.iterations,
            'converged': run.converged,
            'stationarity_gap': run.gap,
            'best_start': best,
            'start_values': [r.value for r in runs],
            'elapsed_ms': elapsed,
        },
        warnings=warnings,
    )
    logger.info(
        f'Generic route: dimension={result.dimension:.12g} from start {best} '
        f'after {run.iterations} iterations ({elapsed:.0f} ms)'
    )
    return result


# ====================================================================
# ORCHESTRATION
# ====================================================================

def dimension(system, opts=None):
    """
    Both routes plus the hypothesis checks; the larger value wins.

    The structural route is skipped when the generic hypothesis fails outright.
    A gap between routes above opts.agreement_tol is reported as a warning.
    """
    opts = opts or DimensionOptions()
    generic_check = check_generic_hypothesis(
        system, grid_points=opts.hypothesis_grid, tol=opts.hypothesis_tol,
    )
    robust1, robust2 = check_robust_hypotheses(system, opts.robust_eps)
    warnings = []
    if generic_check.verdict == Verdict.FAIL:
        warnings.append(f'generic hypothesis fails ({generic_check.detail}); structural route skipped')
    elif generic_check.verdict == Verdict.INCONCLUSIVE:
        warnings.append(f'generic hypothesis inconclusive near t in {list(generic_check.suspect_intervals)}')

    structural = None
    if generic_check.verdict != Verdict.FAIL:
        try:
            structural = maximize_structural(
                system, tol=opts.tol, grid_points=opts.t_grid,
                solver_tol=opts.solver_tol, threads=opts.threads,
            )
        except BracketError as e:
            warnings.append(f'structural route failed: {e}')
            logger.warning(warnings[-1])

    generic = maximize_generic(
        system, starts=opts.starts, tol=opts.tol, seed=opts.seed, max_iter=opts.max_iter,
        solver_tol=opts.solver_tol, threads=opts.threads,
    )

    candidates = [result for result in (structural, generic) if result is not None]
    best = max(candidates, key=lambda result: result.dimension)
    gap = abs(structural.dimension - generic.dimension) if structural else None
    if gap is not None and gap > opts.agreement_tol:
        warnings.append(
            f'structural and generic routes disagree by {gap:.3g} (> {opts.agreement_tol:g})'
        )
        logger.warning(warnings[-1])
    for result in candidates:
        warnings.extend(f'{result.method}: {warning}' for warning in result.warnings)

    t_under, t_over = t_bounds(system, tol=opts.solver_tol)
    diagnostics = {
        'bracket': [t_under, t_over],
        'agreement_gap': gap,
        'structural': _summary(structural),
        'generic': _summary(generic),
        'hypotheses': {
            'generic': generic_check.summary(),
            'robust1': robust1.summary(),
            'robust2': robust2.summary(),
        },
    }
    return DimensionResult(
        dimension=best.dimension, lam=best.lam, t=best.t, P_star=best.P_star,
        method=best.method, diagnostics=diagnostics, warnings=tuple(warnings),
    )


def _summary(result):
    if result is None:
        return None
    return {
        'dimension': result.dimension,
        'lambda': result.lam,
        't': result.t,
        'diagnostics': result.diagnostics,
    }
