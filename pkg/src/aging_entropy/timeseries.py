"""Multivariate metric matrices, min-max scaling, coarse-graining and windowing."""

from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np

from ._validation import ParameterError, check_int, check_matrix

#: longest run of missing samples that forward-filling is allowed to bridge
MAX_FILL_GAP = 5


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    """``N x p`` grid of metric samples taken at a fixed interval.

    Rows are time points and columns are metrics, in the order of
    ``metric_names``. ``timestamps`` holds one slot index (or epoch second)
    per row and defaults to ``0..N-1``.
    """

    values: np.ndarray
    metric_names: tuple = ()
    sample_interval: float = 60.0
    timestamps: np.ndarray = field(default=None)

    def __post_init__(self):
        values = check_matrix(self.values, name="values").copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        names = tuple(self.metric_names) or tuple(f"m{i}" for i in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ParameterError(
                f"{len(names)} metric names given for {values.shape[1]} columns")
        object.__setattr__(self, "metric_names", names)
        if self.timestamps is None:
            ts = np.arange(values.shape[0], dtype=np.int64)
        else:
            ts = np.asarray(self.timestamps)
            if ts.shape != (values.shape[0],):
                raise ParameterError("timestamps must have one entry per row")
        object.__setattr__(self, "timestamps", ts)

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return self.values.shape[0]

    def select(self, columns):
        """Return a new matrix restricted to ``columns`` (indices or names)."""
        unknown = [c for c in columns if isinstance(c, str) and c not in self.metric_names]
        if unknown:
            raise ParameterError(f"unknown metric names: {', '.join(unknown)}")
        idx = [self.metric_names.index(c) if isinstance(c, str) else int(c) for c in columns]
        return MetricMatrix(self.values[:, idx], tuple(self.metric_names[i] for i in idx),
                            self.sample_interval, self.timestamps)

    def rows(self, start, stop):
        return MetricMatrix(self.values[start:stop], self.metric_names,
                            self.sample_interval, self.timestamps[start:stop])


@dataclass(frozen=True, eq=False)
class NormalizedMatrix:
    """Matrix scaled column-wise into ``[0, 1]``.

    ``provenance`` is a ``(p, 2)`` array holding the ``(min, max)`` pair each
    column was scaled with.
    """

    values: np.ndarray
    provenance: np.ndarray

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SlidingWindow:
    """Window of ``length`` rows advancing ``stride`` rows per step."""

    length: int = 1000
    stride: int = 1

    def __post_init__(self):
        check_int(self.length, "window length", low=1)
        check_int(self.stride, "window stride", low=1)

    def starts(self, n_rows):
        """Start offsets of every complete window over ``n_rows`` rows."""
        if n_rows < self.length:
            return range(0)
        return range(0, n_rows - self.length + 1, self.stride)

    def iter_windows(self, X):
        values = check_matrix(X)
        for s in self.starts(values.shape[0]):
            yield s, values[s:s + self.length]


def minmax_normalize(X):
    """Scale every column of ``X`` into ``[0, 1]``.

    Constant columns become all zeros.

    Parameters
    ----------
    X : MetricMatrix or array-like of shape (N, p)
        Needs at least two rows.

    Returns
    -------
    NormalizedMatrix
    """
    values = check_matrix(X, min_rows=2)
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    span = hi - lo
    flat = span == 0
    out = np.zeros_like(values)
    live = ~flat
    out[:, live] = (values[:, live] - lo[live]) / span[live]
    return NormalizedMatrix(out, np.column_stack([lo, hi]))


def coarse_grain(X, tau):
    """Average non-overlapping blocks of ``tau`` rows.

    Output has ``N // tau`` rows; the trailing ``N % tau`` rows are dropped.
    """
    values = check_matrix(X)
    n = values.shape[0]
    tau = check_int(tau, "tau", low=1, high=n)
    if tau == 1:
        out = values.copy()
    else:
        rows = n // tau
        out = values[:rows * tau].reshape(rows, tau, values.shape[1]).mean(axis=1)
    if isinstance(X, NormalizedMatrix):
        return NormalizedMatrix(out, X.provenance)
    return out


def total_variance(X):
    """Trace of the sample covariance matrix (``n - 1`` denominator)."""
    values = check_matrix(X)
    if values.shape[0] < 2:
        raise ParameterError("total variance needs at least two rows")
    return float(np.var(values, axis=0, ddof=1).sum())


def forward_fill(values, max_gap=MAX_FILL_GAP):
    """Replace NaN cells by the last observed value of the same column.

    A run of more than ``max_gap`` missing cells, or a column that starts
    with a missing cell, raises :class:`ParameterError` naming the row.
    Emits a ``RuntimeWarning`` when anything was filled.
    """
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr[:, None]
    missing = np.isnan(arr)
    if not missing.any():
        return arr
    for col in range(arr.shape[1]):
        run = 0
        for row in range(arr.shape[0]):
            if missing[row, col]:
                if row == 0:
                    raise ParameterError(f"row 0, column {col}: no earlier value to fill from")
                run += 1
                if run > max_gap:
                    raise ParameterError(
                        f"row {row}, column {col}: gap longer than {max_gap} samples")
                arr[row, col] = arr[row - 1, col]
            else:
                run = 0
    warnings.warn(f"forward-filled {int(missing.sum())} missing samples", RuntimeWarning,
                  stacklevel=2)
    return arr
