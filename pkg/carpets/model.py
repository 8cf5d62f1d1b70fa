"""
Random self-affine carpet systems.

A system is a list of map families (one per environment symbol i) plus the
environment probability vector. Each family is a stack of rows; each row holds
the cells (rectangles) of one horizontal strip of the unit square. All indices
in this API are 0-based.
"""
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
import json
import logging

import numpy as np
import yaml

logger = logging.getLogger(__name__)

ENV_PROB_TOLERANCE = 1e-12


# ====================================================================
# DOMAIN TYPES
# ====================================================================

@dataclass(frozen=True)
class Cell:
    """One rectangle of a row: width a_ijk, left edge c_ijk."""
    width: float
    x_offset: float


@dataclass(frozen=True)
class Row:
    """Horizontal strip of height b_ij at y_offset d_ij holding ordered cells."""
    height: float
    y_offset: float
    cells: tuple

    @property
    def widths(self):
        return tuple(cell.width for cell in self.cells)


@dataclass(frozen=True)
class CarpetMap:
    """The affine maps A_ijk of one environment symbol, grouped by row."""
    rows: tuple


@dataclass(frozen=True)
class RandomCarpetSystem:
    """
    m carpet maps chosen i.i.d. with probabilities env_probs.

    Immutable; the numeric layout used by the solvers is built once on first use.
    """
    maps: tuple
    env_probs: tuple

    @property
    def m(self):
        return len(self.maps)

    @property
    def row_counts(self):
        return tuple(len(carpet_map.rows) for carpet_map in self.maps)

    @cached_property
    def layout(self):
        return SystemLayout.build(self)


@dataclass(frozen=True, eq=False)
class SystemLayout:
    """
    Flat numpy view of a system.

    Rows are numbered globally in (i, j) order and cells in (i, j, k) order;
    `row_offsets[i]:row_offsets[i+1]` are the rows of map i and
    `cell_offsets[r]:cell_offsets[r+1]` the cells of global row r.
    """
    env_probs: np.ndarray
    row_offsets: np.ndarray
    row_map: np.ndarray
    heights: np.ndarray
    y_offsets: np.ndarray
    cell_offsets: np.ndarray
    cell_row: np.ndarray
    widths: np.ndarray
    x_offsets: np.ndarray

    @classmethod
    def build(cls, system):
        row_offsets = [0]
        row_map, heights, y_offsets = [], [], []
        cell_offsets = [0]
        cell_row, widths, x_offsets = [], [], []
        for i, carpet_map in enumerate(system.maps):
            for row in carpet_map.rows:
                r = len(heights)
                row_map.append(i)
                heights.append(row.height)
                y_offsets.append(row.y_offset)
                for cell in row.cells:
                    cell_row.append(r)
                    widths.append(cell.width)
                    x_offsets.append(cell.x_offset)
                cell_offsets.append(len(widths))
            row_offsets.append(len(heights))
        arrays = dict(
            env_probs=np.asarray(system.env_probs, dtype=float),
            row_offsets=np.asarray(row_offsets, dtype=np.int64),
            row_map=np.asarray(row_map, dtype=np.int64),
            heights=np.asarray(heights, dtype=float),
            y_offsets=np.asarray(y_offsets, dtype=float),
            cell_offsets=np.asarray(cell_offsets, dtype=np.int64),
            cell_row=np.asarray(cell_row, dtype=np.int64),
            widths=np.asarray(widths, dtype=float),
            x_offsets=np.asarray(x_offsets, dtype=float),
        )
        for array in arrays.values():
            array.flags.writeable = False
        return cls(**arrays)

    @property
    def n_rows(self):
        return len(self.heights)

    @property
    def n_cells(self):
        return len(self.widths)

    @cached_property
    def log_widths(self):
        return np.log(self.widths)

    @cached_property
    def log_heights(self):
        return np.log(self.heights)

    @cached_property
    def cell_counts(self):
        """m_ij per global row."""
        return np.diff(self.cell_offsets)

    @cached_property
    def row_env_probs(self):
        """p_i repeated for every row of map i."""
        return self.env_probs[self.row_map]

    def row_sums(self, t):
        """Σ_k a_ijk^t for every global row."""
        return np.bincount(self.cell_row, weights=self.widths ** t, minlength=self.n_rows)

    def row_sums_many(self, ts):
        """Row sums for a batch of exponents; shape (len(ts), n_rows)."""
        ts = np.asarray(ts, dtype=float)
        powers = np.exp(np.multiply.outer(ts, self.log_widths))
        return np.add.reduceat(powers, self.cell_offsets[:-1], axis=1)

    def row_sums_with_slopes_many(self, ts):
        """Row sums and their t-derivatives Σ_k a_ijk^t log a_ijk; both shaped (len(ts), n_rows)."""
        ts = np.asarray(ts, dtype=float)
        powers = np.exp(np.multiply.outer(ts, self.log_widths))
        starts = self.cell_offsets[:-1]
        return (
            np.add.reduceat(powers, starts, axis=1),
            np.add.reduceat(powers * self.log_widths, starts, axis=1),
        )

    def block_sums(self, values):
        """Sum a per-row array over the rows of each map."""
        return np.add.reduceat(values, self.row_offsets[:-1], axis=-1)


# ====================================================================
# CONSTRUCTION & PARSING
# ====================================================================

def build_system(maps, env_probs):
    """Build a system from nested plain data (lists of row dicts), renormalising env_probs."""
    built = tuple(
        CarpetMap(rows=tuple(
            Row(
                height=float(row['height']),
                y_offset=float(row['y_offset']),
                cells=tuple(
                    Cell(width=float(cell['width']), x_offset=float(cell['x_offset']))
                    for cell in row['cells']
                ),
            )
            for row in rows
        ))
        for rows in maps
    )
    return RandomCarpetSystem(maps=built, env_probs=normalize_env_probs(env_probs))


def normalize_env_probs(env_probs):
    """
    Rescale so the probabilities sum to one exactly.

    A vector whose sum is off by more than ENV_PROB_TOLERANCE is returned
    untouched so validate_geometry can report it.
    """
    probs = tuple(float(p) for p in env_probs)
    total = sum(probs)
    if probs and abs(total - 1.0) <= ENV_PROB_TOLERANCE:
        probs = tuple(p / total for p in probs)
    return probs


def parse_system(text, slack=None, validate=True):
    """
    Parse a config document (YAML or JSON) into a validated system.

    Raises SchemaError when the document does not match the schema and
    GeometryError when validate_geometry reports violations. With
    validate=False the geometry is left for the caller to check.
    """
    from .serializers import CarpetSystemSerializer
    from .validators import GeometryError, SchemaError, validate_geometry, GEOMETRY_SLACK

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise SchemaError(f"Config is not valid YAML/JSON: {e}")

    serializer = CarpetSystemSerializer(data=data)
    if not serializer.is_valid():
        raise SchemaError(f"Config does not match the carpet schema: {serializer.errors}")

    system = build_system(**serializer.validated_data)
    if not validate:
        return system
    report = validate_geometry(system, slack=GEOMETRY_SLACK if slack is None else slack)
    if not report.ok:
        raise GeometryError(report.messages())
    logger.debug(f'Parsed system with {system.m} maps and {system.layout.n_cells} cells')
    return system


def load_system(path, slack=None, validate=True):
    """Read and parse a config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise OSError(f"Cannot read config {path}: {e}") from e
    return parse_system(text, slack=slack, validate=validate)


def system_to_data(system):
    """Plain nested data in the config schema."""
    return {
        'maps': [
            [
                {
                    'height': row.height,
                    'y_offset': row.y_offset,
                    'cells': [{'width': cell.width, 'x_offset': cell.x_offset} for cell in row.cells],
                }
                for row in carpet_map.rows
            ]
            for carpet_map in system.maps
        ],
        'env_probs': list(system.env_probs),
    }


def serialize_system(system, fmt='yaml'):
    """Config text for a system; parse_system(serialize_system(s)) == s."""
    data = system_to_data(system)
    if fmt == 'json':
        return json.dumps(data, indent=2)
    if fmt == 'yaml':
        return yaml.safe_dump(data, sort_keys=False)
    raise ValueError(f"Unknown config format '{fmt}'. Use 'yaml' or 'json'.")


# ====================================================================
# ROW SUMS
# ====================================================================

def row_sum(system, i, j, t):
    """Σ_k a_ijk^t summed in cell order."""
    if not 0 <= i < system.m:
        raise IndexError(f"Map index {i} out of range (system has {system.m} maps)")
    rows = system.maps[i].rows
    if not 0 <= j < len(rows):
        raise IndexError(f"Row index {j} out of range (map {i} has {len(rows)} rows)")
    total = 0.0
    for cell in rows[j].cells:
        total += cell.width ** t
    return total
