"""Online failure detectors over a composed-entropy (or any indicator) stream.

* FT: static threshold ``beta * max(training)``.
* FT-X: the same threshold, raised whenever a value observed in a normal
  state exceeds the stored maximum.
* Extended Shewhart chart: the standardized deviation between a local
  window average and the running global mean must exceed ``epsilon`` on
  ``p_run`` consecutive points to confirm a change; the second confirmed
  change is reported as a failure.

Every detector has a lower-boundary mode for indicators that fall with
aging (FT/FT-X only).
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field
import itertools
import math
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ParameterError, check_int, check_positive, check_series
from .evaluation import DECISION_WINDOW, LabeledTrace, aggregate, f1_key

UPPER = "upper"
LOWER = "lower"
TRAINING_GAP = 200


def _check_mode(mode):
    if mode not in (UPPER, LOWER):
        raise ParameterError(f"mode must be 'upper' or 'lower', got {mode!r}")
    return mode


@dataclass
class FtState:
    beta: float
    trained_extreme: float
    mode: str = UPPER

    @property
    def ft(self):
        if self.mode == UPPER:
            return self.beta * self.trained_extreme
        return self.trained_extreme / self.beta


@dataclass
class FtxState(FtState):
    updates: int = 0


def _train(training, beta, mode):
    values = check_series(training, min_length=1, name="training")
    check_positive(beta, "beta")
    extreme = values.max() if _check_mode(mode) == UPPER else values.min()
    return float(beta), float(extreme)


def ft_train(training, beta, mode=UPPER):
    """Fit the static threshold on indicator values from a normal period."""
    return FtState(*_train(training, beta, mode), mode)


def ftx_train(training, beta, mode=UPPER):
    return FtxState(*_train(training, beta, mode), mode)


def ft_step(state, ce):
    """Failure iff ``ce`` strictly crosses the threshold."""
    if state.mode == UPPER:
        return bool(ce > state.ft)
    return bool(ce < state.ft)


def ftx_step(state, ce, system_normal=None):
    """Judge ``ce`` against the current threshold, then learn from it.

    When the system is known to be normal, the stored extreme absorbs
    ``ce``. ``system_normal=None`` means "normal unless this step is
    reported as a failure".
    """
    verdict = ft_step(state, ce)
    if system_normal is None:
        system_normal = not verdict
    if system_normal:
        if state.mode == UPPER and ce > state.trained_extreme:
            state.trained_extreme = float(ce)
            state.updates += 1
        elif state.mode == LOWER and ce < state.trained_extreme:
            state.trained_extreme = float(ce)
            state.updates += 1
    return verdict


@dataclass
class ShewhartState:
    """Mutable state of the extended Shewhart chart.

    ``n``, ``mean`` and ``m2`` are Welford accumulators over every value
    seen so far; ``window`` holds the last ``window_size`` values.
    """

    window_size: int
    epsilon: float
    p_run: int = 4
    window: deque = field(default=None)
    run_length: int = 0
    changes_seen: int = 0
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    last_deviation: float = None

    def __post_init__(self):
        check_int(self.window_size, "window_size", low=1)
        check_int(self.p_run, "p_run", low=1)
        if self.window is None:
            self.window = deque(maxlen=self.window_size)

    @property
    def global_std(self):
        return math.sqrt(self.m2 / (self.n - 1)) if self.n > 1 else 0.0


def shewhart_init(window_size, epsilon, p_run=4):
    return ShewhartState(window_size, float(epsilon), p_run)


def shewhart_deviation(local_mean, global_mean, global_std, window_size):
    """``sqrt(N') / sigma * (a - mu)``; zero when ``sigma`` is zero."""
    if global_std == 0:
        return 0.0
    return math.sqrt(window_size) / global_std * (local_mean - global_mean)


def shewhart_step(state, ce):
    """Feed one value; return True once two changes have been confirmed.

    No deviation is evaluated until ``window_size`` values have been seen.
    The local average includes the current value.
    """
    ce = float(ce)
    state.n += 1
    delta = ce - state.mean
    state.mean += delta / state.n
    state.m2 += delta * (ce - state.mean)
    state.window.append(ce)
    if len(state.window) < state.window_size:
        state.last_deviation = None
        return state.changes_seen >= 2
    local = sum(state.window) / len(state.window)
    d = shewhart_deviation(local, state.mean, state.global_std, state.window_size)
    state.last_deviation = d
    if d > state.epsilon:
        state.run_length += 1
        if state.run_length == state.p_run:
            state.changes_seen += 1
            state.run_length = 0
    else:
        state.run_length = 0
    return state.changes_seen >= 2


class FailureThreshold(BaseEstimator):
    """Static threshold detector (FT).

    Parameters
    ----------
    beta : float, default=2.0
        Fluctuation factor applied to the training extreme.
    mode : {"upper", "lower"}, default="upper"
    """

    def __init__(self, beta=2.0, mode=UPPER):
        self.beta = beta
        self.mode = mode

    def fit(self, X, y=None):
        self.state_ = ft_train(X, self.beta, self.mode)
        self.threshold_ = self.state_.ft
        return self

    def predict(self, X):
        check_is_fitted(self, "state_")
        values = check_series(X, name="X")
        if self.mode == UPPER:
            return values > self.threshold_
        return values < self.threshold_


class IncrementalFailureThreshold(BaseEstimator):
    """Threshold detector that keeps learning from normal-state values (FT-X).

    ``predict`` works on a copy of the fitted state; use :meth:`step` to
    advance the fitted state itself.
    """

    def __init__(self, beta=1.1, mode=UPPER):
        self.beta = beta
        self.mode = mode

    def fit(self, X, y=None):
        self.state_ = ftx_train(X, self.beta, self.mode)
        return self

    def step(self, ce, system_normal=None):
        check_is_fitted(self, "state_")
        return ftx_step(self.state_, ce, system_normal)

    def predict(self, X, normal=None):
        """Verdicts for ``X``; ``normal`` optionally gives per-step feedback."""
        check_is_fitted(self, "state_")
        values = check_series(X, name="X")
        state = copy.copy(self.state_)
        flags = [None] * values.size if normal is None else list(normal)
        if len(flags) != values.size:
            raise ParameterError("normal must have one entry per value")
        return np.array([ftx_step(state, v, f) for v, f in zip(values, flags)], dtype=bool)


class ShewhartDetector(BaseEstimator):
    """Extended Shewhart control chart with the second-change rule.

    Parameters
    ----------
    window : int, default=6
        Local averaging window ``N'`` over the indicator stream.
    epsilon : float, default=6.5
    p_run : int, default=4
        Consecutive exceedances that confirm a change.
    """

    def __init__(self, window=6, epsilon=6.5, p_run=4):
        self.window = window
        self.epsilon = epsilon
        self.p_run = p_run

    def fit(self, X=None, y=None):
        """Reset the chart; values in ``X`` are fed as history."""
        self.state_ = shewhart_init(self.window, self.epsilon, self.p_run)
        if X is not None:
            for v in check_series(X, name="X"):
                shewhart_step(self.state_, v)
        return self

    def step(self, ce):
        check_is_fitted(self, "state_")
        return shewhart_step(self.state_, ce)

    def predict(self, X):
        if not hasattr(self, "state_"):
            self.fit()
        state = copy.deepcopy(self.state_)
        return np.array([shewhart_step(state, v) for v in check_series(X, name="X")],
                        dtype=bool)


FAMILIES = {
    "ft": FailureThreshold,
    "ftx": IncrementalFailureThreshold,
    "shewhart": ShewhartDetector,
}


@dataclass(frozen=True, eq=False)
class IndicatorTrace:
    """An indicator series with the labeled failure point of its experiment."""

    timestamps: np.ndarray
    values: np.ndarray
    failure_point: float

    def __post_init__(self):
        object.__setattr__(self, "timestamps", np.asarray(self.timestamps))
        object.__setattr__(self, "values", check_series(self.values, name="values"))
        if self.timestamps.shape != self.values.shape:
            raise ParameterError("timestamps and values must have equal length")


def training_cut(failure_point, decision_window=DECISION_WINDOW, gap=TRAINING_GAP):
    """Last timestamp used to train threshold detectors.

    Training stops ``gap`` slots before the decision window opens, leaving
    that stretch as unlabeled normal operation.
    """
    return failure_point - decision_window - gap


def run_detector(detector, trace, decision_window=DECISION_WINDOW, gap=TRAINING_GAP,
                 feedback="label"):
    """Run one detector over one labeled indicator trace.

    Threshold detectors train on the values up to :func:`training_cut` and
    report on the rest. FT-X learns from every step before the decision
    window when ``feedback="label"``, or from every step it does not flag
    when ``feedback="verdict"``. The Shewhart chart reports on every step.

    Returns
    -------
    LabeledTrace
    """
    ts, values = trace.timestamps, trace.values
    if isinstance(detector, ShewhartDetector):
        det = copy.deepcopy(detector).fit()
        return LabeledTrace(ts, det.predict(values), trace.failure_point, decision_window)
    train = ts <= training_cut(trace.failure_point, decision_window, gap)
    if not train.any():
        raise ParameterError("trace has no values before the training cut")
    det = copy.deepcopy(detector).fit(values[train])
    test_ts, test_values = ts[~train], values[~train]
    if isinstance(detector, IncrementalFailureThreshold):
        if feedback == "label":
            normal = test_ts < trace.failure_point - decision_window
        elif feedback == "verdict":
            normal = None
        else:
            raise ParameterError(f"unknown feedback {feedback!r}")
        verdicts = det.predict(test_values, normal)
    else:
        verdicts = det.predict(test_values)
    return LabeledTrace(test_ts, verdicts, trace.failure_point, decision_window)


def evaluate_detector(detector, traces, **kwargs):
    return aggregate([run_detector(detector, t, **kwargs) for t in traces])


class SweepCell(NamedTuple):
    params: dict
    result: object


@dataclass(frozen=True)
class SweepResult:
    family: str
    cells: list

    @property
    def best(self):
        """Cell with the highest F1; the first one wins ties."""
        return max(self.cells, key=lambda c: f1_key(c.result))


def sweep(family, grid, traces, **kwargs):
    """Evaluate a detector family on every combination of ``grid`` values.

    Parameters
    ----------
    family : {"ft", "ftx", "shewhart"}
    grid : dict
        Maps constructor parameter names to candidate values.
    traces : list of IndicatorTrace
    """
    if family not in FAMILIES:
        raise ParameterError(f"unknown detector family {family!r}")
    names = list(grid)
    cells = []
    for combo in itertools.product(*(grid[n] for n in names)):
        params = dict(zip(names, combo))
        result = evaluate_detector(FAMILIES[family](**params), traces, **kwargs)
        cells.append(SweepCell(params, result))
    return SweepResult(family, cells)
