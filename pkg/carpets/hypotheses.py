"""
Checkers for the hypotheses under which the variational dimension formula holds.

generic  - for every t in [0,1] some map has two rows with different Σ_k a^t
robust1  - heights and widths of each map stay within a factor (1+eps) of a centre
robust2  - every cell is nearly as wide as its row is high
"""
from dataclasses import dataclass, field
import logging

import numpy as np
from django.db import models

logger = logging.getLogger(__name__)

HYPOTHESIS_TOL = 1e-9
HYPOTHESIS_GRID = 1025


class Hypothesis(models.TextChoices):
    GENERIC = 'generic', 'Distinct row sums for every t'
    ROBUST1 = 'robust1', 'Heights and widths close to per-map centres'
    ROBUST2 = 'robust2', 'Cells nearly square relative to their rows'


class Verdict(models.TextChoices):
    PASS = 'pass', 'Pass'
    FAIL = 'fail', 'Fail'
    INCONCLUSIVE = 'inconclusive', 'Inconclusive'


@dataclass(frozen=True)
class HypothesisReport:
    """
    Outcome of one hypothesis check.

    witnesses: for `generic`, one (t, i, j, j2, difference) per grid point that
    passed, or the violating configuration on failure; for the robust checks,
    the worst ratio with its location.
    """
    hypothesis: str
    verdict: str
    witnesses: tuple = ()
    suspect_intervals: tuple = ()
    worst_ratio: float = None
    centres: tuple = ()
    detail: str = ''
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == Verdict.PASS

    def summary(self):
        data = {'hypothesis': str(self.hypothesis), 'verdict': str(self.verdict), 'detail': self.detail}
        if self.worst_ratio is not None:
            data['worst_ratio'] = self.worst_ratio
        if self.suspect_intervals:
            data['suspect_intervals'] = [list(interval) for interval in self.suspect_intervals]
        if self.centres:
            data['centres'] = [list(centre) for centre in self.centres]
        return data


# ====================================================================
# GENERIC HYPOTHESIS
# ====================================================================

def _row_sum_pairs(system):
    """(i, j, j2, r, r2) for every pair of rows j < j2 inside one map; r are global rows."""
    layout = system.layout
    pairs = []
    for i in range(system.m):
        start, stop = layout.row_offsets[i], layout.row_offsets[i + 1]
        for r in range(start, stop):
            for r2 in range(r + 1, stop):
                pairs.append((i, r - start, r2 - start, r, r2))
    return pairs


def _max_differences(system, pairs, ts):
    """Largest |Σ a^t - Σ a'^t| over row pairs, with the index of the pair achieving it."""
    sums = system.layout.row_sums_many(ts)
    first = np.array([pair[3] for pair in pairs])
    second = np.array([pair[4] for pair in pairs])
    differences = np.abs(sums[:, first] - sums[:, second])
    best = differences.argmax(axis=1)
    return differences[np.arange(len(ts)), best], best


def _identical_rows_everywhere(system):
    return all(
        len({tuple(sorted(row.widths)) for row in carpet_map.rows}) == 1
        for carpet_map in system.maps
    )


def check_generic_hypothesis(system, grid_points=HYPOTHESIS_GRID, tol=HYPOTHESIS_TOL):
    """
    Check on a uniform t-grid that some map separates two of its row sums.

    Each grid point that fails (all differences ≤ tol) is bisected once towards
    both neighbours to bound the suspect interval. The verdict is `fail` only when
    the sums coincide identically (every map's rows share one width multiset);
    isolated near-crossings give `inconclusive` with the suspect intervals.
    """
    if grid_points < 2:
        raise ValueError(f"grid_points must be at least 2, got {grid_points}")

    pairs = _row_sum_pairs(system)
    if not pairs or _identical_rows_everywhere(system):
        detail = 'all pairwise sums equal' if pairs else 'no map has two rows'
        logger.warning(f'Generic hypothesis fails: {detail}')
        return HypothesisReport(
            hypothesis=Hypothesis.GENERIC,
            verdict=Verdict.FAIL,
            witnesses=((0.5, detail),),
            suspect_intervals=((0.0, 1.0),),
            detail=detail,
        )

    ts = np.linspace(0.0, 1.0, grid_points)
    values, best = _max_differences(system, pairs, ts)
    passing = values > tol
    witnesses = tuple(
        (float(t), pairs[b][0], pairs[b][1], pairs[b][2], float(v))
        for t, b, v, ok in zip(ts, best, values, passing) if ok
    )
    if passing.all():
        return HypothesisReport(
            hypothesis=Hypothesis.GENERIC,
            verdict=Verdict.PASS,
            witnesses=witnesses,
            detail=f'{grid_points} grid points separated by more than {tol:g}',
        )

    step = 1.0 / (grid_points - 1)
    failing = ts[~passing]
    halves = np.clip(np.concatenate([failing - step / 2, failing + step / 2]), 0.0, 1.0)
    half_values, _ = _max_differences(system, pairs, halves)
    left_ok = half_values[:len(failing)] > tol
    right_ok = half_values[len(failing):] > tol

    intervals = []
    for t, lok, rok in zip(failing, left_ok, right_ok):
        lo = max(0.0, t - (step / 2 if lok else step))
        hi = min(1.0, t + (step / 2 if rok else step))
        if intervals and lo <= intervals[-1][1]:
            intervals[-1] = (intervals[-1][0], hi)
        else:
            intervals.append((float(lo), float(hi)))

    logger.warning(f'Generic hypothesis inconclusive near t in {intervals}')
    return HypothesisReport(
        hypothesis=Hypothesis.GENERIC,
        verdict=Verdict.INCONCLUSIVE,
        witnesses=witnesses,
        suspect_intervals=tuple(intervals),
        detail=f'{len(failing)} grid points with all row-sum differences ≤ {tol:g}',
        extra={'near_equal_t': [float(t) for t in failing]},
    )


# ====================================================================
# ROBUST HYPOTHESES
# ====================================================================

def _spread(ratio):
    """Multiplicative distance from 1."""
    return max(ratio, 1.0 / ratio)


def check_robust_hypotheses(system, eps):
    """
    Measure both robust hypotheses against a user-supplied eps.

    robust1 uses the geometric means of each map's heights and widths as the
    centres (b_i, a_i); the centres are reported so other choices can be tried.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    bound = 1.0 + eps

    worst1, where1, centres = 1.0, None, []
    centres_ordered = True
    worst2, where2 = 0.0, None
    for i, carpet_map in enumerate(system.maps):
        heights = np.array([row.height for row in carpet_map.rows])
        widths = np.array([a for row in carpet_map.rows for a in row.widths])
        b_i = float(np.exp(np.log(heights).mean()))
        a_i = float(np.exp(np.log(widths).mean()))
        centres.append((a_i, b_i))
        centres_ordered &= a_i <= b_i
        for j, row in enumerate(carpet_map.rows):
            spread = _spread(row.height / b_i)
            if spread > worst1:
                worst1, where1 = spread, (i, j)
            for k, cell in enumerate(row.cells):
                spread = _spread(cell.width / a_i)
                if spread > worst1:
                    worst1, where1 = spread, (i, j, k)
                ratio = row.height / cell.width
                if ratio > worst2:
                    worst2, where2 = ratio, (i, j, k)

    verdict1 = Verdict.PASS if worst1 < bound and centres_ordered else Verdict.FAIL
    verdict2 = Verdict.PASS if worst2 < bound else Verdict.FAIL
    robust1 = HypothesisReport(
        hypothesis=Hypothesis.ROBUST1,
        verdict=verdict1,
        witnesses=((where1, worst1),),
        worst_ratio=worst1,
        centres=tuple(centres),
        detail=f'worst ratio {worst1:.6g} against bound {bound:.6g}'
               + ('' if centres_ordered else '; a geometric-mean centre has a_i > b_i'),
    )
    robust2 = HypothesisReport(
        hypothesis=Hypothesis.ROBUST2,
        verdict=verdict2,
        witnesses=((where2, worst2),),
        worst_ratio=worst2,
        detail=f'worst b/a ratio {worst2:.6g} against bound {bound:.6g}',
    )
    return robust1, robust2
