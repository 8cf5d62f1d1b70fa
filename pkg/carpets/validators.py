"""
Geometry validators for carpet systems
"""
from dataclasses import dataclass
import itertools

from django.core.exceptions import ValidationError

GEOMETRY_SLACK = 1e-12

# Human-readable text for every constraint id
CONSTRAINT_MESSAGES = {
    'empty_system': "system has no maps",
    'empty_map': "map has no rows",
    'empty_row': "row has no cells",
    'env_probs_length': "env_probs length differs from the number of maps",
    'env_prob_positive': "environment probability is not positive",
    'env_probs_sum': "environment probabilities do not sum to 1",
    'height_range': "row height outside (0,1)",
    'width_range': "cell width outside (0,1)",
    'y_offset_range': "row offset outside [0,1)",
    'x_offset_range': "cell offset outside [0,1)",
    'a_exceeds_b': "a exceeds b",
    'row_heights_sum': "row heights exceed 1",
    'cell_widths_sum': "cell widths exceed 1",
    'row_gap': "row gap",
    'row_top': "last row leaves the unit square",
    'cell_gap': "cell gap",
    'cell_right': "last cell leaves the unit square",
}


class SchemaError(ValidationError):
    """Config text does not match the carpet schema."""


class GeometryError(ValidationError):
    """System violates the carpet geometry constraints."""


@dataclass(frozen=True)
class Violation:
    constraint: str
    location: tuple
    value: float

    @property
    def message(self):
        where = ','.join(str(index) for index in self.location)
        return f"{CONSTRAINT_MESSAGES[self.constraint]} at ({where}): {self.value:.6g}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def messages(self):
        return [violation.message for violation in self.violations]

    def constraints(self):
        return {violation.constraint for violation in self.violations}


def validate_geometry(system, slack=GEOMETRY_SLACK):
    """
    Check every placement inequality of a system.

    - 0 < a_ijk ≤ b_ij < 1
    - Σ_j b_ij ≤ 1 and Σ_k a_ijk ≤ 1
    - rows and cells ordered with gaps at least the preceding height / width
    - env_probs positive and summing to 1

    Violations are returned as data; nothing is raised.
    """
    violations = []

    def check(condition, constraint, location, value):
        if not condition:
            violations.append(Violation(constraint, tuple(location), float(value)))

    check(system.m >= 1, 'empty_system', (), system.m)
    check(len(system.env_probs) == system.m, 'env_probs_length', (), len(system.env_probs))
    for i, p in enumerate(system.env_probs):
        check(p > 0, 'env_prob_positive', (i,), p)
    total = sum(system.env_probs)
    check(abs(total - 1.0) <= slack, 'env_probs_sum', (), total)

    for i, carpet_map in enumerate(system.maps):
        rows = carpet_map.rows
        check(len(rows) >= 1, 'empty_map', (i,), len(rows))
        heights = 0.0
        for j, row in enumerate(rows):
            b, d = row.height, row.y_offset
            heights += b
            check(0 < b < 1, 'height_range', (i, j), b)
            check(0 <= d < 1, 'y_offset_range', (i, j), d)
            if j + 1 < len(rows):
                gap = rows[j + 1].y_offset - d
                check(gap >= b - slack, 'row_gap', (i, j), gap)
            else:
                check(1 - d >= b - slack, 'row_top', (i, j), 1 - d)

            cells = row.cells
            check(len(cells) >= 1, 'empty_row', (i, j), len(cells))
            widths = 0.0
            for k, cell in enumerate(cells):
                a, c = cell.width, cell.x_offset
                widths += a
                check(0 < a < 1, 'width_range', (i, j, k), a)
                check(0 <= c < 1, 'x_offset_range', (i, j, k), c)
                check(a <= b + slack, 'a_exceeds_b', (i, j, k), a)
                if k + 1 < len(cells):
                    gap = cells[k + 1].x_offset - c
                    check(gap >= a - slack, 'cell_gap', (i, j, k), gap)
                else:
                    check(1 - c >= a - slack, 'cell_right', (i, j, k), 1 - c)
            check(widths <= 1 + slack, 'cell_widths_sum', (i, j), widths)
        check(heights <= 1 + slack, 'row_heights_sum', (i,), heights)

    return ValidationReport(violations=tuple(violations))


def first_level_rectangles(carpet_map):
    """(x, y, w, h) of every R_ijk = A_ijk([0,1]^2) of one map, in (j, k) order."""
    return [
        (cell.x_offset, row.y_offset, cell.width, row.height)
        for row in carpet_map.rows
        for cell in row.cells
    ]


def overlapping_rectangles(system, slack=GEOMETRY_SLACK):
    """
    Pairs of first-level rectangles whose interiors intersect.

    Direct interval-overlap test, independent of the ordered-gap inequalities;
    returns a list of (i, first, second) with rectangle positions in (j, k) order.
    """
    overlaps = []
    for i, carpet_map in enumerate(system.maps):
        rects = first_level_rectangles(carpet_map)
        for (p, first), (q, second) in itertools.combinations(enumerate(rects), 2):
            x_overlap = min(first[0] + first[2], second[0] + second[2]) - max(first[0], second[0])
            y_overlap = min(first[1] + first[3], second[1] + second[3]) - max(first[1], second[1])
            if x_overlap > slack and y_overlap > slack:
                overlaps.append((i, p, q))
    return overlaps
