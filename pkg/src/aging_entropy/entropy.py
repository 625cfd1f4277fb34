"""Sample entropy, multiscale entropy and its multivariate extension.

The multivariate indicator (MMSE) normalizes a window of metrics into
``[0, 1]``, derives one similarity tolerance from the total variance of the
normalized window, coarse-grains the window at scales ``1..T`` and computes
a vector-norm sample entropy at each scale. The per-scale entropies are
fused into a single composed entropy, their Euclidean norm.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
import math

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ParameterError, check_int, check_matrix, check_positive, check_series
from .timeseries import SlidingWindow, coarse_grain, minmax_normalize, total_variance


class UndefinedEntropyError(ArithmeticError):
    """No template pairs matched at length ``m`` or ``m + 1``.

    ``a`` and ``b`` are the ordered-pair match counts at lengths ``m + 1``
    and ``m``.
    """

    def __init__(self, a, b):
        self.a = int(a)
        self.b = int(b)
        super().__init__(f"sample entropy undefined (A={self.a}, B={self.b})")


@njit(cache=True)
def _pair_counts(Y, m, r):
    # Templates are visited in order of their first coordinate so that only
    # neighbours within r on that coordinate are compared; the pairs found
    # are exactly those of the all-pairs scan.
    n, p = Y.shape
    n_templates = n - m
    order = np.argsort(Y[:n_templates, 0], kind="mergesort")
    a = 0
    b = 0
    for s in range(n_templates - 1):
        i = order[s]
        for t in range(s + 1, n_templates):
            j = order[t]
            if Y[j, 0] - Y[i, 0] > r:
                break
            close = True
            for k in range(m):
                for c in range(p):
                    if abs(Y[i + k, c] - Y[j + k, c]) > r:
                        close = False
                        break
                if not close:
                    break
            if close:
                b += 1
                for c in range(p):
                    if abs(Y[i + m, c] - Y[j + m, c]) > r:
                        close = False
                        break
                if close:
                    a += 1
    return 2 * a, 2 * b


def match_counts(Y, m, r):
    """Count ordered template pairs ``i != j`` within tolerance ``r``.

    Templates are runs of ``m`` consecutive rows starting at
    ``0 .. n - m - 1``; two templates match when every coordinatewise
    absolute difference is ``<= r``.

    Returns
    -------
    (A, B) : tuple of int
        Matches at length ``m + 1`` and at length ``m``.
    """
    Y = check_matrix(Y, name="Y")
    m = check_int(m, "m", low=1)
    r = check_positive(r, "r", allow_zero=True)
    if Y.shape[0] < m + 2:
        raise ParameterError(f"need at least m + 2 = {m + 2} rows, got {Y.shape[0]}")
    a, b = _pair_counts(np.ascontiguousarray(Y), m, r)
    return int(a), int(b)


def extended_sample_entropy(Y, m, r):
    """Sample entropy of a multivariate series under the max-norm.

    A template is ``m`` consecutive ``p``-dimensional rows and the distance
    between two templates is the largest of their ``m * p`` coordinate
    differences. Every dimension is extended by one row at once for the
    ``m + 1`` templates.

    Raises
    ------
    UndefinedEntropyError
        If either match count is zero.
    """
    a, b = match_counts(Y, m, r)
    if a == 0 or b == 0:
        raise UndefinedEntropyError(a, b)
    return math.log(b / a)


def sample_entropy(x, m, r):
    """Classical sample entropy ``-ln(A / B)`` of a single series."""
    x = check_series(x, min_length=1)
    return extended_sample_entropy(x[:, None], m, r)


def entropy_cap(n, m):
    """Value substituted for an undefined sample entropy on ``n`` rows."""
    return math.log((n - m) * (n - m - 1))


@dataclass(frozen=True)
class EntropyConfig:
    """Parameters of the multiscale computation.

    ``m`` is the embedding dimension, ``n_scales`` the number of
    coarse-graining scales and ``r_factor`` the multiplier applied to the
    total variance (or, for a single series, the standard deviation).
    """

    m: int = 2
    n_scales: int = 10
    r_factor: float = 0.15
    window: SlidingWindow = field(default_factory=SlidingWindow)

    def __post_init__(self):
        check_int(self.m, "m", low=1)
        check_int(self.n_scales, "n_scales", low=1)
        check_positive(self.r_factor, "r_factor")
        if not isinstance(self.window, SlidingWindow):
            raise ParameterError("window must be a SlidingWindow")
        shortest = self.window.length // self.n_scales
        if shortest < 10 ** self.m:
            raise ParameterError(
                f"window of {self.window.length} rows leaves {shortest} rows at scale "
                f"{self.n_scales}; need at least 10**m = {10 ** self.m}")


@dataclass(frozen=True, eq=False)
class EntropyProfile:
    per_scale: np.ndarray
    composed: float
    window_end: object = None
    undefined_scales: tuple = ()
    tolerance: float = float("nan")

    @property
    def flagged(self):
        return bool(self.undefined_scales)


def composed_entropy(per_scale):
    """Euclidean norm of a per-scale entropy vector."""
    return float(np.sqrt(np.sum(np.square(np.asarray(per_scale, dtype=np.float64)))))


def _profile(Y, cfg, r, window_end):
    per_scale = np.empty(cfg.n_scales)
    undefined = []
    for tau in range(1, cfg.n_scales + 1):
        grained = coarse_grain(Y, tau)
        try:
            per_scale[tau - 1] = extended_sample_entropy(grained, cfg.m, r)
        except UndefinedEntropyError:
            per_scale[tau - 1] = entropy_cap(grained.shape[0], cfg.m)
            undefined.append(tau)
    return EntropyProfile(per_scale, composed_entropy(per_scale), window_end,
                          tuple(undefined), r)


def _check_window(n_rows, cfg):
    if n_rows != cfg.window.length:
        raise ParameterError(
            f"window has {n_rows} rows, configuration expects {cfg.window.length}")


def mmse(X, cfg=None, tolerance=None, window_end=None):
    """Multidimensional multiscale entropy of one window of metrics.

    Parameters
    ----------
    X : MetricMatrix or array-like of shape (N, p)
        ``N`` must equal ``cfg.window.length``.
    cfg : EntropyConfig, optional
    tolerance : float, optional
        Overrides ``r_factor * total_variance`` of the normalized window.
    window_end : optional
        Timestamp recorded on the returned profile.

    Returns
    -------
    EntropyProfile
        Scales whose entropy is undefined carry :func:`entropy_cap` and are
        listed in ``undefined_scales``.
    """
    cfg = cfg or EntropyConfig()
    values = check_matrix(X, min_rows=2)
    _check_window(values.shape[0], cfg)
    normalized = minmax_normalize(values).values
    if tolerance is None:
        r = cfg.r_factor * total_variance(normalized)
    else:
        r = check_positive(tolerance, "tolerance", allow_zero=True)
    if window_end is None and hasattr(X, "timestamps"):
        window_end = X.timestamps[-1]
    return _profile(normalized, cfg, r, window_end)


def mse_profile(x, cfg=None, tolerance=None, window_end=None):
    """Classical multiscale entropy of a single series.

    The tolerance defaults to ``r_factor`` times the sample standard
    deviation of ``x`` and is reused at every scale.
    """
    cfg = cfg or EntropyConfig()
    x = check_series(x, min_length=2)
    _check_window(x.shape[0], cfg)
    if tolerance is None:
        r = cfg.r_factor * float(np.std(x, ddof=1))
    else:
        r = check_positive(tolerance, "tolerance", allow_zero=True)
    return _profile(x[:, None], cfg, r, window_end)


def window_profiles(X, cfg=None):
    """Slide ``cfg.window`` over ``X`` and compute :func:`mmse` per window."""
    cfg = cfg or EntropyConfig()
    values = check_matrix(X)
    ts = getattr(X, "timestamps", None)
    if ts is None:
        ts = np.arange(values.shape[0])
    return [mmse(w, cfg, window_end=ts[s + cfg.window.length - 1])
            for s, w in cfg.window.iter_windows(values)]


class StreamingMMSE:
    """Row-at-a-time MMSE over a sliding window.

    :meth:`push` returns an :class:`EntropyProfile` whenever a window
    completes on the configured stride, otherwise ``None``.
    """

    def __init__(self, cfg=None):
        self.cfg = cfg or EntropyConfig()
        self._rows = deque(maxlen=self.cfg.window.length)
        self._seen = 0

    def push(self, row, timestamp=None):
        self._rows.append(np.asarray(row, dtype=np.float64).ravel())
        self._seen += 1
        length = self.cfg.window.length
        if self._seen < length or (self._seen - length) % self.cfg.window.stride:
            return None
        ts = self._seen - 1 if timestamp is None else timestamp
        return mmse(np.vstack(self._rows), self.cfg, window_end=ts)


class MMSETransformer(TransformerMixin, BaseEstimator):
    """Turn a multivariate metric stream into a composed-entropy series.

    Each output row corresponds to one window of ``window`` samples; windows
    advance by ``stride`` rows.

    Parameters
    ----------
    m : int, default=2
    n_scales : int, default=10
    r_factor : float, default=0.15
    window : int, default=1000
    stride : int, default=1
    output : {"composed", "profile"}, default="composed"
        ``"profile"`` returns the per-scale entropies instead of their norm.
    """

    def __init__(self, m=2, n_scales=10, r_factor=0.15, window=1000, stride=1,
                 output="composed"):
        self.m = m
        self.n_scales = n_scales
        self.r_factor = r_factor
        self.window = window
        self.stride = stride
        self.output = output

    def _config(self):
        return EntropyConfig(self.m, self.n_scales, self.r_factor,
                             SlidingWindow(self.window, self.stride))

    def fit(self, X, y=None):
        if self.output not in ("composed", "profile"):
            raise ParameterError(f"unknown output {self.output!r}")
        self.config_ = self._config()
        self.n_features_in_ = check_matrix(X).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        values = check_matrix(X)
        if values.shape[1] != self.n_features_in_:
            raise ParameterError(
                f"X has {values.shape[1]} columns, fitted with {self.n_features_in_}")
        profiles = window_profiles(values, self.config_)
        self.undefined_windows_ = [i for i, p in enumerate(profiles) if p.flagged]
        if self.output == "profile":
            return np.array([p.per_scale for p in profiles]).reshape(-1, self.n_scales)
        return np.array([p.composed for p in profiles]).reshape(-1, 1)

    def window_ends(self, n_rows):
        """Row index of the last sample of each window over ``n_rows`` rows."""
        return np.array([s + self.window - 1
                         for s in SlidingWindow(self.window, self.stride).starts(n_rows)])
