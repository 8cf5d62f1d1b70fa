"""
Grid fractal percolation as a random carpet system.

At every level one whole selection pattern of the k×k grid is drawn; a pattern
with l selected squares has probability a q^l (1-q)^(k²-l), conditioned on
being nonempty (a = 1 / (1 - (1-q)^(k²))).
"""
from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy.special import gammaln

from .model import CarpetMap, Cell, RandomCarpetSystem, Row
from .moran import RowDistribution, lambda_of, solve_t
from .optimizer import DimensionResult, Method

logger = logging.getLogger(__name__)

PATTERN_CAP = 10 ** 6
EXACT_BINOMIAL_LIMIT = 30
SCALE_TOL = 1e-12


@dataclass(frozen=True)
class GridPattern:
    """Selected squares (row, col) of a k×k grid; row 0 is the bottom row."""
    k: int
    selected: frozenset

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if not self.selected:
            raise ValueError("A grid pattern must select at least one square")
        for row, col in self.selected:
            if not (0 <= row < self.k and 0 <= col < self.k):
                raise ValueError(f"Square ({row}, {col}) is outside the {self.k}x{self.k} grid")

    @classmethod
    def from_mask(cls, k, mask):
        """Bit row*k + col of `mask` selects square (row, col)."""
        return cls(k=k, selected=frozenset(
            divmod(bit, k) for bit in range(k * k) if mask >> bit & 1
        ))

    @property
    def mask(self):
        return sum(1 << (row * self.k + col) for row, col in self.selected)

    @property
    def count(self):
        return len(self.selected)

    def row_counts(self):
        """Selected squares per occupied grid row, bottom to top."""
        counts = {}
        for row, _ in self.selected:
            counts[row] = counts.get(row, 0) + 1
        return [counts[row] for row in sorted(counts)]


def _check_grid(k):
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    patterns = 2 ** (k * k) - 1
    if patterns > PATTERN_CAP:
        raise ValueError(
            f"k={k} gives {patterns} patterns; enumeration is capped at {PATTERN_CAP} (k <= 4)"
        )
    return patterns


def _check_q(q):
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def enumerate_patterns(k):
    """Every nonempty pattern, ordered by bitmask."""
    patterns = _check_grid(k)
    for mask in range(1, patterns + 1):
        yield GridPattern.from_mask(k, mask)


def pattern_map(pattern):
    """CarpetMap of one pattern: occupied grid rows only, squares of side 1/k."""
    k = pattern.k
    side = 1.0 / k
    columns = {}
    for row, col in pattern.selected:
        columns.setdefault(row, []).append(col)
    return CarpetMap(rows=tuple(
        Row(
            height=side,
            y_offset=row / k,
            cells=tuple(Cell(width=side, x_offset=col / k) for col in sorted(columns[row])),
        )
        for row in sorted(columns)
    ))


def build_percolation_system(k, q):
    """One map per nonempty pattern, with conditional-binomial probabilities."""
    _check_q(q)
    patterns = list(enumerate_patterns(k))
    squares = k * k
    normaliser = -1.0 / math.expm1(squares * math.log1p(-q))
    probs = np.array([
        normaliser * q ** pattern.count * (1 - q) ** (squares - pattern.count)
        for pattern in patterns
    ])
    probs /= math.fsum(probs)
    logger.info(f'Built percolation system k={k}, q={q} with {len(patterns)} maps')
    return RandomCarpetSystem(
        maps=tuple(pattern_map(pattern) for pattern in patterns),
        env_probs=tuple(float(p) for p in probs),
    )


def closed_form_dim(k, q):
    """
    a Σ_l C(k²,l) q^l (1-q)^(k²-l) log l / log k.

    Exact binomials up to k² = 30, log-gamma beyond.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    _check_q(q)
    squares = k * k
    normaliser = -1.0 / math.expm1(squares * math.log1p(-q))
    if squares <= EXACT_BINOMIAL_LIMIT:
        total = math.fsum(
            math.comb(squares, l) * q ** l * (1 - q) ** (squares - l) * math.log(l)
            for l in range(2, squares + 1)
        )
    else:
        l = np.arange(2, squares + 1)
        log_weights = (
            gammaln(squares + 1) - gammaln(l + 1) - gammaln(squares - l + 1)
            + l * math.log(q) + (squares - l) * math.log1p(-q)
        )
        total = float(np.sum(np.exp(log_weights) * np.log(l)))
    return normaliser * total / math.log(k)


def optimal_row_distribution(system):
    """
    p_ij = p_i m_ij / Σ_j m_ij.

    Only valid when every height and width is the same scale; anything else is refused.
    """
    layout = system.layout
    scale = layout.heights[0]
    if (np.max(np.abs(layout.heights - scale)) > SCALE_TOL
            or np.max(np.abs(layout.widths - scale)) > SCALE_TOL):
        raise ValueError(
            "optimal_row_distribution needs a system with one common scale for every "
            "height and width (a percolation system)"
        )
    counts = layout.cell_counts.astype(float)
    weights = layout.row_env_probs * counts / layout.block_sums(counts)[layout.row_map]
    return RowDistribution.from_flat(system, weights)


def closed_form_result(system, k, q, tol=1e-12):
    """DimensionResult at the optimal P, with the closed-form value alongside."""
    P = optimal_row_distribution(system)
    t = solve_t(system, P, tol=tol)
    lam = lambda_of(system, P)
    closed_form = closed_form_dim(k, q)
    return DimensionResult(
        dimension=lam + t, lam=lam, t=t, P_star=P, method=Method.CLOSED_FORM,
        diagnostics={'closed_form': closed_form, 'formula_gap': abs(lam + t - closed_form)},
    )
