"""
Machine-readable run reports (--out).

The format is picked from the file extension: .json, or .yaml/.yml.
"""
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
import json
import logging
import time

import numpy as np
import yaml
from rest_framework import serializers

from .serializers import RESULT_KEYS, RunReportSerializer

logger = logging.getLogger(__name__)

REPORT_FORMATS = {'.json': 'json', '.yaml': 'yaml', '.yml': 'yaml'}


class ReportError(OSError):
    """Report file cannot be written, read or parsed."""


@dataclass
class RunReport:
    command: str
    inputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    seed: int = None

    def to_data(self):
        return to_plain({
            'command': self.command,
            'inputs': self.inputs,
            'results': self.results,
            'warnings': self.warnings,
            'timings': self.timings,
            'seed': self.seed,
        })


def to_plain(value):
    """Recursively turn numpy values, tuples and choice enums into JSON/YAML-safe data."""
    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_plain(item) for item in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, str):
        return str(value)
    return value


@contextmanager
def timed(timings, phase):
    """Record the elapsed milliseconds of a block under timings[phase]."""
    started = time.perf_counter()
    try:
        yield
    finally:
        timings[phase] = (time.perf_counter() - started) * 1000


def report_format(path):
    suffix = Path(path).suffix.lower()
    if suffix not in REPORT_FORMATS:
        raise ReportError(
            f"Cannot choose a report format for {path}: use one of {', '.join(REPORT_FORMATS)}"
        )
    return REPORT_FORMATS[suffix]


def _validated(data, source):
    serializer = RunReportSerializer(data=data)
    if not serializer.is_valid():
        raise ReportError(f"Report {source} does not match the report schema: {serializer.errors}")
    return serializer.validated_data


def dumps_report(report, fmt):
    data = report.to_data()
    _validated(data, f'for {report.command}')
    if fmt == 'json':
        return json.dumps(data, indent=2) + '\n'
    return yaml.safe_dump(data, sort_keys=False)


def write_report(report, path):
    """Write the report, format chosen by extension."""
    path = Path(path)
    text = dumps_report(report, report_format(path))
    try:
        path.write_text(text, encoding='utf-8')
    except OSError as e:
        raise ReportError(f"Cannot write report to {path}: {e}") from e
    logger.info(f'Wrote {report.command} report to {path}')


def read_report(path):
    """Read a report written by write_report back into a RunReport."""
    path = Path(path)
    fmt = report_format(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ReportError(f"Cannot read report {path}: {e}") from e
    try:
        data = json.loads(text) if fmt == 'json' else yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as e:
        raise ReportError(f"Report {path} is not valid {fmt}: {e}") from e
    validated = _validated(data, str(path))
    return RunReport(
        command=validated['command'],
        inputs=dict(validated['inputs']),
        results=dict(validated['results']),
        warnings=list(validated['warnings']),
        timings=dict(validated['timings']),
        seed=validated['seed'],
    )


def report_schema():
    """Field-by-field description of the report, derived from the serializer."""
    fields = {}
    for name, serializer_field in RunReportSerializer().fields.items():
        fields[name] = {
            'type': type(serializer_field).__name__,
            'required': serializer_field.required,
            'allow_null': getattr(serializer_field, 'allow_null', False),
        }
        if isinstance(serializer_field, serializers.DictField) and name == 'timings':
            fields[name]['values'] = 'milliseconds'
    return {'report': fields, 'result_keys': RESULT_KEYS}
