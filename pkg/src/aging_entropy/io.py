"""CSV ingestion and writers for metric matrices, reports and tables."""

from __future__ import annotations

import csv
from datetime import datetime
import json
import os

import numpy as np

from ._validation import ParameterError
from .timeseries import MAX_FILL_GAP, MetricMatrix, forward_fill


class IngestError(ParameterError):
    """A metric CSV could not be read; ``line`` is the 1-based file line."""

    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _parse_time(cell, line):
    cell = cell.strip()
    try:
        return int(cell), False
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(cell.replace("Z", "+00:00"))
    except ValueError:
        raise IngestError(f"unparsable timestamp {cell!r}", line) from None
    return stamp.timestamp(), True


def _parse_cell(cell, line, name):
    cell = cell.strip()
    if cell == "" or cell.lower() == "nan":
        return np.nan
    try:
        value = float(cell)
    except ValueError:
        raise IngestError(f"unparsable value {cell!r} in column {name!r}", line) from None
    if not np.isfinite(value):
        raise IngestError(f"non-finite value {cell!r} in column {name!r}", line)
    return value


def ingest(path, max_gap=MAX_FILL_GAP):
    """Read a metric CSV into a uniformly sampled :class:`MetricMatrix`.

    The first column holds integer slot numbers or ISO-8601 timestamps; the
    others hold numeric metrics under a header row. Empty cells and skipped
    time slots are forward-filled (at most ``max_gap`` in a row) with a
    ``RuntimeWarning``. ISO timestamps are converted to slot indices counted
    from the first row, and ``sample_interval`` holds the slot length in
    seconds.

    Raises
    ------
    IngestError
        On an unparsable cell, non-increasing timestamps or an unfillable gap.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty file", 1) from None
        if len(header) < 2:
            raise IngestError("need a timestamp column and at least one metric", 1)
        names = tuple(h.strip() for h in header[1:])
        times, rows, lines = [], [], []
        iso = None
        for line, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise IngestError(f"expected {len(header)} cells, got {len(record)}", line)
            t, is_iso = _parse_time(record[0], line)
            if iso is None:
                iso = is_iso
            elif iso != is_iso:
                raise IngestError("mixed timestamp formats", line)
            if times and t <= times[-1]:
                raise IngestError("timestamps must be strictly increasing", line)
            times.append(t)
            rows.append([_parse_cell(c, line, n) for c, n in zip(record[1:], names)])
            lines.append(line)
    if not rows:
        raise IngestError("no data rows", 2)

    times = np.array(times)
    diffs = np.diff(times)
    step = 1 if diffs.size == 0 else min(diffs)
    offsets = np.rint((times - times[0]) / step).astype(np.int64)
    if not np.allclose(offsets * step, times - times[0]):
        bad = int(np.flatnonzero(~np.isclose(offsets * step, times - times[0]))[0])
        raise IngestError(f"timestamp off the {step} sampling grid", lines[bad])
    jumps = np.diff(offsets) - 1
    if jumps.size and jumps.max() > max_gap:
        i = int(np.argmax(jumps))
        raise IngestError(f"{int(jumps[i])} missing samples exceed the limit of {max_gap}",
                          lines[i + 1])

    grid = np.full((offsets[-1] + 1, len(names)), np.nan)
    grid[offsets] = np.array(rows, dtype=np.float64)
    try:
        values = forward_fill(grid, max_gap)
    except ParameterError as exc:
        raise IngestError(f"cannot fill missing values ({exc})") from None

    if iso:
        return MetricMatrix(values, names, float(step), np.arange(values.shape[0]))
    slots = times[0] + step * np.arange(values.shape[0], dtype=np.int64)
    return MetricMatrix(values, names, 60.0, slots)


def write_matrix(matrix, path):
    """Write a :class:`MetricMatrix` as CSV; floats round-trip exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", *matrix.metric_names])
        for t, row in zip(matrix.timestamps, matrix.values):
            w.writerow([str(t), *(repr(float(v)) for v in row)])


def write_table(path, header, rows):
    """Write a tidy CSV table; ``None`` becomes an empty cell."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


def read_labels(path):
    """Map trace name to failure point from a ``trace,failure_point`` CSV."""
    labels = {}
    with open(path, newline="") as fh:
        for line, rec in enumerate(csv.DictReader(fh), start=2):
            try:
                labels[rec["trace"]] = int(rec["failure_point"])
            except (KeyError, TypeError, ValueError):
                raise IngestError("expected columns trace,failure_point", line) from None
    return labels


def trace_name(path):
    return os.path.splitext(os.path.basename(path))[0]


class ReportWriter:
    """Append :class:`~aging_entropy.pipeline.DetectionReport` records as JSON lines."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w")

    def write(self, report):
        self._fh.write(json.dumps(report.as_dict(), sort_keys=True) + "\n")

    def flush(self):
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_reports(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
