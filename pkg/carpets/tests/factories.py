"""
Carpet systems shared by the test modules.
"""
import math

import numpy as np

from carpets.model import build_system, system_to_data

# log2(2^(log3 2) + 1)
MCMULLEN_DIMENSION = math.log2(2 ** (math.log(2) / math.log(3)) + 1)
LOG2_OVER_LOG3 = math.log(2) / math.log(3)


def row(height, y_offset, cells):
    """cells: list of (width, x_offset)."""
    return {
        'height': height,
        'y_offset': y_offset,
        'cells': [{'width': width, 'x_offset': x} for width, x in cells],
    }


def minimal_system():
    """One map, one row b=0.5, two cells of width 0.25."""
    return build_system([[row(0.5, 0.0, [(0.25, 0.0), (0.25, 0.5)])]], [1.0])


def moran_system(width, count, height=0.5):
    """One map, one row holding `count` equal cells."""
    return build_system(
        [[row(height, 0.0, [(width, k / count) for k in range(count)])]], [1.0],
    )


def grid_carpet(row_counts, n_h, n_v):
    """Deterministic grid carpet: rows of height 1/n_v, row_counts[j] cells of width 1/n_h."""
    rows = [
        row(1 / n_v, j / n_v, [(1 / n_h, k / n_h) for k in range(count)])
        for j, count in enumerate(row_counts)
    ]
    return build_system([rows], [1.0])


def mcmullen_system():
    """Rows of height 1/2; row 0 has two cells of width 1/3, row 1 has one."""
    return grid_carpet([2, 1], 3, 2)


def random_system(rng, max_maps=3, max_rows=3, max_cells=3):
    """Valid random system with m, m_i, m_ij drawn up to the given maxima."""
    m = int(rng.integers(1, max_maps + 1))
    maps = []
    for _ in range(m):
        n_rows = int(rng.integers(1, max_rows + 1))
        rows = []
        for j in range(n_rows):
            height = rng.uniform(0.2, 0.95) / n_rows
            n_cells = int(rng.integers(1, max_cells + 1))
            cells = [
                (rng.uniform(0.2, 0.95) * min(height, 1 / n_cells), k / n_cells)
                for k in range(n_cells)
            ]
            rows.append(row(height, j / n_rows, cells))
        maps.append(rows)
    env_probs = rng.dirichlet(np.ones(m)) * 0.9 + 0.1 / m
    return build_system(maps, env_probs / env_probs.sum())


def flat_numbers(system):
    """Every number of a system in config order, plus its shape signature."""
    data = system_to_data(system)
    numbers, shape = [], []
    for rows in data['maps']:
        shape.append(tuple(len(r['cells']) for r in rows))
        for r in rows:
            numbers += [r['height'], r['y_offset']]
            for cell in r['cells']:
                numbers += [cell['width'], cell['x_offset']]
    return np.array(numbers + data['env_probs']), shape
