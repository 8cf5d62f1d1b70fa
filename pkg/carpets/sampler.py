"""
Monte Carlo side of the toolkit.

- environments i = (i_1, i_2, ...) and symbol paths ω = ((j_1, k_1), ...) drawn from
  seeded numpy generators
- basic rectangles, approximate squares and the masses of the Bernoulli measure
  μ̃ attached to a row distribution P
- n-approximations of a realisation and box counting on them

RNG contract: every random decision comes from
`np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))`
(PCG64). Environments and paths are drawn by inverse CDF on `Generator.random()`
doubles and capped approximations are thinned with `Generator.choice`, so the
same seed reproduces the same environment, path and approximation bit for bit.
All indices are 0-based.
"""
from dataclasses import dataclass
from typing import NamedTuple
import logging
import math

import numpy as np
from scipy.stats import linregress

from .moran import solve_t

logger = logging.getLogger(__name__)

APPROX_CAP = 200000
DEPTH_TOL = 1e-12
# fraction of a box; edges within it of a grid line touch the line only
BOX_TOL = 1e-9

# RNG streams
ENVIRONMENT = 0
ROWS = 1
CELLS = 2
SUBSAMPLE = 3
PATHS = 4


def generator(seed, stream):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def new_seed():
    """Fresh 64-bit seed from OS entropy."""
    return int(np.random.default_rng().integers(0, 2 ** 64, dtype=np.uint64))


def derive_seed(seed, index):
    """Independent 64-bit seed for the index-th path of a run."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(PATHS, index))
    return int(sequence.generate_state(1, np.uint64)[0])


# ====================================================================
# DOMAIN TYPES
# ====================================================================

@dataclass(frozen=True, eq=False)
class Environment:
    """Map indices i_1..i_n drawn i.i.d. from env_probs."""
    seed: int
    indices: np.ndarray

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class SymbolPath:
    """Row j_l and cell k_l chosen at each step, local to map i_l."""
    rows: np.ndarray
    cells: np.ndarray

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle; log_w/log_h stay exact when w/h underflow."""
    x: float
    y: float
    w: float
    h: float
    log_w: float
    log_h: float


@dataclass(frozen=True, eq=False)
class RectSet:
    """Rectangles of an n-approximation, in generation order."""
    depth: int
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    h: np.ndarray
    log_w: np.ndarray
    log_h: np.ndarray
    truncated: bool = False

    def __len__(self):
        return len(self.x)

    @property
    def rects(self):
        return [
            Rect(*values)
            for values in zip(self.x.tolist(), self.y.tolist(), self.w.tolist(),
                              self.h.tolist(), self.log_w.tolist(), self.log_h.tolist())
        ]

    def records(self):
        """Flat record stream, one dict per rectangle."""
        for rect in self.rects:
            yield {
                'depth': self.depth, 'x': rect.x, 'y': rect.y, 'w': rect.w, 'h': rect.h,
                'log_w': rect.log_w, 'log_h': rect.log_h,
            }

    @classmethod
    def unit_square(cls):
        one, zero = np.ones(1), np.zeros(1)
        return cls(depth=0, x=zero, y=zero.copy(), w=one, h=one.copy(),
                   log_w=zero.copy(), log_h=zero.copy())


class BoxCountEstimate(NamedTuple):
    dimension: float
    r2: float
    counts: list
    scales: list


# ====================================================================
# SAMPLING
# ====================================================================

def _choose(cdf, u):
    """Inverse CDF: index of the first entry of each cdf row above u."""
    return (cdf <= u[:, None]).sum(axis=1)


def _padded_cdf(probabilities, offsets):
    """
    One cumulative row per segment, padded with 2.0.

    Entries from the last positive probability on are set to 2.0, so a draw
    never lands on a zero-probability slot or beyond the segment.
    """
    counts = np.diff(offsets)
    cdf = np.full((len(counts), counts.max()), 2.0)
    for s, (start, stop) in enumerate(zip(offsets[:-1], offsets[1:])):
        block = probabilities[start:stop]
        last = np.flatnonzero(block > 0)[-1]
        cdf[s, :last] = np.cumsum(block)[:last]
    return cdf


def sample_environment(system, n, seed=None):
    """n i.i.d. map indices by inverse CDF on the ENVIRONMENT stream."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    seed = new_seed() if seed is None else seed
    cdf = np.cumsum(system.layout.env_probs)
    cdf[-1] = 1.0
    u = generator(seed, ENVIRONMENT).random(n)
    indices = np.searchsorted(cdf, u, side='right')
    return Environment(seed=seed, indices=indices)


def cell_probabilities(system, t):
    """a_ijk^t / Σ_k a_ijk^t for every global cell."""
    layout = system.layout
    log_sums = np.log(layout.row_sums(t))
    return np.exp(t * layout.log_widths - log_sums[layout.cell_row])


def sample_path(system, P, env, seed=None, t=None):
    """
    One path of μ̃_P: row j with probability p_ij / p_i, then cell k with
    probability a^t / Σ_k a^t, t = t(P). Rows come from the ROWS stream and
    cells from the CELLS stream of `seed` (default: the environment seed).
    """
    layout = system.layout
    t = solve_t(system, P) if t is None else t
    seed = env.seed if seed is None else seed
    n = len(env)

    row_cdf = _padded_cdf(P.conditionals(system), layout.row_offsets)
    rows = _choose(row_cdf[env.indices], generator(seed, ROWS).random(n))

    global_rows = layout.row_offsets[env.indices] + rows
    cell_cdf = _padded_cdf(cell_probabilities(system, t), layout.cell_offsets)
    cells = _choose(cell_cdf[global_rows], generator(seed, CELLS).random(n))
    return SymbolPath(rows=rows, cells=cells)


# ====================================================================
# CYLINDERS & APPROXIMATE SQUARES
# ====================================================================

def _steps(system, env, path, n):
    """Global row and cell index of the first n steps."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if n > min(len(env), len(path)):
        raise ValueError(f"n={n} exceeds the path length {min(len(env), len(path))}")
    layout = system.layout
    global_rows = layout.row_offsets[env.indices[:n]] + path.rows[:n]
    global_cells = layout.cell_offsets[global_rows] + path.cells[:n]
    return global_rows, global_cells


def cylinder_rectangle(system, env, path, n):
    """R_ω(n): composition of the first n maps applied to the unit square."""
    layout = system.layout
    rows, cells = _steps(system, env, path, n)
    log_w = np.cumsum(layout.log_widths[cells])
    log_h = np.cumsum(layout.log_heights[rows])
    outer_w = np.exp(np.concatenate([[0.0], log_w[:-1]]))
    outer_h = np.exp(np.concatenate([[0.0], log_h[:-1]]))
    tiny = np.finfo(float).tiny
    return Rect(
        x=float(np.dot(layout.x_offsets[cells], outer_w)),
        y=float(np.dot(layout.y_offsets[rows], outer_h)),
        w=max(math.exp(log_w[-1]), tiny),
        h=max(math.exp(log_h[-1]), tiny),
        log_w=float(log_w[-1]),
        log_h=float(log_h[-1]),
    )


def depth_threshold(system):
    """Smallest n with L_n ≥ 1 guaranteed: n ≥ log(min a) / log(max b)."""
    layout = system.layout
    return max(1, math.ceil(math.log(layout.widths.min()) / math.log(layout.heights.max()) - DEPTH_TOL))


def _depths(prefix_a, prefix_b, ns):
    """L_n for each n: largest k with Σ_{l≤k} log a ≥ Σ_{l≤n} log b."""
    targets = prefix_b[ns - 1]
    slack = DEPTH_TOL * np.abs(targets)
    depths = np.searchsorted(-prefix_a, -targets + slack, side='right')
    return np.minimum(depths, ns)


def approximate_square_depth(system, env, path, n):
    """
    L_n(ω) = max{k ≥ 1 : Π_{l≤n} b ≤ Π_{l≤k} a}.

    Raises ValueError below depth_threshold(system).
    """
    threshold = depth_threshold(system)
    if n < threshold:
        raise ValueError(
            f"n={n} is below the approximate-square threshold n >= log(min a)/log(max b) = {threshold}"
        )
    layout = system.layout
    rows, cells = _steps(system, env, path, n)
    prefix_a = np.cumsum(layout.log_widths[cells])
    prefix_b = np.cumsum(layout.log_heights[rows])
    return int(_depths(prefix_a, prefix_b, np.array([n]))[0])


def _log_step_masses(system, P, env, path, n, t):
    """Per-step log(p_ij/p_i) and log(a^t/Σa^t), plus log b."""
    layout = system.layout
    rows, cells = _steps(system, env, path, n)
    with np.errstate(divide='ignore'):
        log_rows = np.log(P.conditionals(system)[rows])
    log_cells = np.log(cell_probabilities(system, t)[cells])
    return log_rows, log_cells, layout.log_heights[rows], layout.log_widths[cells]


def cylinder_log_mass(system, P, env, path, n, t=None):
    """log μ̃ of the order-n cylinder [ω_1..ω_n]."""
    t = solve_t(system, P) if t is None else t
    log_rows, log_cells, _, _ = _log_step_masses(system, P, env, path, n, t)
    return float(log_rows.sum() + log_cells.sum())


def path_measure(system, P, env, path, n, t=None):
    """
    log μ̃(B_n(ω)): all n row choices, cell choices only up to L_n.

    -inf when the path uses a row of zero probability.
    """
    t = solve_t(system, P) if t is None else t
    depth = approximate_square_depth(system, env, path, n)
    log_rows, log_cells, _, _ = _log_step_masses(system, P, env, path, n, t)
    value = float(log_rows.sum() + log_cells[:depth].sum())
    if value == -math.inf:
        logger.warning(f'Path visits a zero-probability row within its first {n} steps')
    return value


def empirical_pointwise_dim(system, P, env, path, n, t=None):
    """log μ̃(B_n(ω)) / Σ_{l≤n} log b; +inf on a zero-probability row."""
    t = solve_t(system, P) if t is None else t
    log_mass = path_measure(system, P, env, path, n, t=t)
    rows, _ = _steps(system, env, path, n)
    return log_mass / float(system.layout.log_heights[rows].sum())


def pointwise_dimension_trace(system, P, env, path, ns, t=None):
    """Pointwise-dimension ratios at every n in `ns`, from one pass of prefix sums."""
    ns = np.asarray(ns, dtype=np.int64)
    threshold = depth_threshold(system)
    if ns.size == 0 or ns.min() < threshold:
        raise ValueError(
            f"Every n must be at least the approximate-square threshold {threshold}, got {ns.tolist()}"
        )
    t = solve_t(system, P) if t is None else t
    log_rows, log_cells, log_b, log_a = _log_step_masses(system, P, env, path, int(ns.max()), t)
    prefix_b = np.cumsum(log_b)
    depths = _depths(np.cumsum(log_a), prefix_b, ns)
    prefix_rows = np.cumsum(log_rows)
    prefix_cells = np.concatenate([[0.0], np.cumsum(log_cells)])
    return (prefix_rows[ns - 1] + prefix_cells[depths]) / prefix_b[ns - 1]


# ====================================================================
# n-APPROXIMATIONS
# ====================================================================

def generate_approximation(system, env, depth, cap=APPROX_CAP, seed=None):
    """
    Breadth-first expansion of the unit square through env.indices[:depth].

    When a level would exceed `cap` rectangles, exactly `cap` of them are kept,
    chosen without replacement from the SUBSAMPLE stream of `seed` (default
    env.seed) and left in generation order; the set is marked truncated.
    """
    if depth < 1:
        raise ValueError(f"depth must be at least 1, got {depth}")
    if depth > len(env):
        raise ValueError(f"depth={depth} exceeds the environment length {len(env)}")
    if cap < 1:
        raise ValueError(f"cap must be positive, got {cap}")
    layout = system.layout
    rng = generator(env.seed if seed is None else seed, SUBSAMPLE)

    current = RectSet.unit_square()
    x, y, log_w, log_h = current.x, current.y, current.log_w, current.log_h
    truncated = False
    for level in range(depth):
        i = env.indices[level]
        cells = np.arange(layout.cell_offsets[layout.row_offsets[i]],
                          layout.cell_offsets[layout.row_offsets[i + 1]])
        rows = layout.cell_row[cells]
        w, h = np.exp(log_w), np.exp(log_h)
        x = (x[:, None] + w[:, None] * layout.x_offsets[cells]).ravel()
        y = (y[:, None] + h[:, None] * layout.y_offsets[rows]).ravel()
        log_w = (log_w[:, None] + layout.log_widths[cells]).ravel()
        log_h = (log_h[:, None] + layout.log_heights[rows]).ravel()
        if len(x) > cap:
            keep = np.sort(rng.choice(len(x), size=cap, replace=False))
            logger.warning(f'Approximation truncated at level {level + 1}: kept {cap} of {len(x)} rectangles')
            x, y, log_w, log_h = x[keep], y[keep], log_w[keep], log_h[keep]
            truncated = True

    return RectSet(depth=depth, x=x, y=y, w=np.exp(log_w), h=np.exp(log_h),
                   log_w=log_w, log_h=log_h, truncated=truncated)


def box_count_estimate(rects, scales):
    """
    Slope of log N(δ) against log(1/δ) with the fit r².

    N(δ) counts δ-grid boxes meeting the interior of some rectangle. Scales
    must be strictly decreasing, at least 3, and no finer than the largest
    rectangle side.
    """
    if len(rects) == 0:
        raise ValueError("Box counting needs at least one rectangle, got an empty set")
    scales = np.asarray(scales, dtype=float)
    if scales.size < 3:
        raise ValueError(f"Box counting needs at least 3 scales, got {scales.size}")
    if np.any(np.diff(scales) >= 0):
        raise ValueError(f"Scales must be strictly decreasing, got {scales.tolist()}")
    resolution = float(max(rects.w.max(), rects.h.max()))
    if scales[-1] < resolution * (1 - BOX_TOL) or scales[0] > 1:
        raise ValueError(
            f"Scales must lie in [{resolution:.6g}, 1] (largest rectangle side to 1), "
            f"got {scales[-1]:.6g}..{scales[0]:.6g}"
        )

    counts = []
    for delta in scales:
        stride = int(math.ceil(1.0 / delta)) + 2
        x0 = np.floor(rects.x / delta + BOX_TOL).astype(np.int64)
        y0 = np.floor(rects.y / delta + BOX_TOL).astype(np.int64)
        x1 = np.maximum(np.ceil((rects.x + rects.w) / delta - BOX_TOL).astype(np.int64) - 1, x0)
        y1 = np.maximum(np.ceil((rects.y + rects.h) / delta - BOX_TOL).astype(np.int64) - 1, y0)
        keys = np.concatenate([x0 * stride + y0, x0 * stride + y1, x1 * stride + y0, x1 * stride + y1])
        counts.append(int(np.unique(keys).size))

    fit = linregress(np.log(1.0 / scales), np.log(counts))
    logger.info(f'Box counting over {len(rects)} rectangles: slope={fit.slope:.6g}, r2={fit.rvalue ** 2:.6g}')
    return BoxCountEstimate(
        dimension=float(fit.slope), r2=float(fit.rvalue ** 2), counts=counts, scales=scales.tolist(),
    )
