"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np


class ParameterError(ValueError):
    """Raised when a numeric parameter is outside its valid range."""


class NonFiniteValueError(ValueError):
    """Raised when an input matrix contains NaN or infinite samples."""

    def __init__(self, row, column):
        self.row = int(row)
        self.column = int(column)
        super().__init__(f"non-finite value at row {self.row}, column {self.column}")


def check_matrix(X, min_rows=1, name="X"):
    """Return ``X`` as a 2-D float64 array, rejecting non-finite entries.

    1-D input is treated as a single column.
    """
    values = getattr(X, "values", X)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise ParameterError(f"{name} needs at least one column")
    if arr.shape[0] < min_rows:
        raise ParameterError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    bad = ~np.isfinite(arr)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise NonFiniteValueError(row, col)
    return arr


def check_series(x, min_length=1, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ParameterError(f"{name} needs at least {min_length} samples, got {arr.shape[0]}")
    bad = ~np.isfinite(arr)
    if bad.any():
        raise NonFiniteValueError(int(np.flatnonzero(bad)[0]), 0)
    return arr


def check_int(value, name, low=None, high=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if low is not None and value < low:
        raise ParameterError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ParameterError(f"{name} must be <= {high}, got {value}")
    return value


def check_positive(value, name, allow_zero=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ParameterError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ParameterError(f"{name} must be finite and {bound}, got {value}")
    return value
