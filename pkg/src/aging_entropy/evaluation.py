"""Decision-window scoring of failure reports: recall, precision, F1, ATTF."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._validation import ParameterError

DECISION_WINDOW = 100


class UndefinedMetricError(ArithmeticError):
    """A metric has no defined value; ``reason`` says why."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True, eq=False)
class LabeledTrace:
    """Boolean verdicts of one detector run plus its labeled failure point.

    The decision window is ``[failure_point - decision_window_length,
    failure_point]``, closed on both ends.
    """

    timestamps: np.ndarray
    verdicts: np.ndarray
    failure_point: float
    decision_window_length: float = DECISION_WINDOW

    def __post_init__(self):
        ts = np.asarray(self.timestamps)
        v = np.asarray(self.verdicts, dtype=bool)
        if ts.ndim != 1 or ts.shape != v.shape:
            raise ParameterError("timestamps and verdicts must be 1-D and of equal length")
        if ts.size and np.any(np.diff(ts) < 0):
            raise ParameterError("reports must be ordered by time")
        if ts.size and self.failure_point < ts[0]:
            raise ParameterError(
                f"failure point {self.failure_point} precedes trace start {ts[0]}")
        if self.decision_window_length < 0:
            raise ParameterError("decision window length must be non-negative")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "verdicts", v)

    @property
    def window(self):
        return self.failure_point - self.decision_window_length, self.failure_point

    def in_window(self):
        left, right = self.window
        return (self.timestamps >= left) & (self.timestamps <= right)


class Counts(NamedTuple):
    n_tp: int
    n_fp: int
    n_fn: int


@dataclass(frozen=True)
class EvalResult:
    """Micro-aggregated scores; ``None`` marks a 0/0 metric.

    ``attf`` is the mean ahead-time-to-failure over traces where it is
    defined; ``attf_undefined`` counts the others.
    """

    n_tp: int
    n_fn: int
    n_fp: int
    recall: Optional[float]
    precision: Optional[float]
    f1: Optional[float]
    attf: Optional[float] = None
    attf_undefined: int = 0

    def as_dict(self):
        return {"n_tp": self.n_tp, "n_fn": self.n_fn, "n_fp": self.n_fp,
                "recall": self.recall, "precision": self.precision, "f1": self.f1,
                "attf": self.attf, "attf_undefined": self.attf_undefined}


def classify(trace):
    """Count true positives, false positives and the (at most one) miss.

    Returns
    -------
    Counts
        ``(n_tp, n_fp, n_fn)``.
    """
    positive = trace.verdicts
    inside = trace.in_window()
    n_tp = int(np.count_nonzero(positive & inside))
    n_fp = int(np.count_nonzero(positive & ~inside))
    return Counts(n_tp, n_fp, 0 if n_tp else 1)


def attf(trace):
    """Slots between the first failure report and the decision window.

    Zero when the first report falls inside the window.

    Raises
    ------
    UndefinedMetricError
        ``reason == "no_report"`` if nothing was reported, ``"late"`` if the
        first report comes after the failure point.
    """
    hits = np.flatnonzero(trace.verdicts)
    if hits.size == 0:
        raise UndefinedMetricError("no_report")
    first = trace.timestamps[hits[0]]
    left, right = trace.window
    if first > right:
        raise UndefinedMetricError("late")
    if first >= left:
        return 0
    return left - first


def _ratio(num, den):
    return num / den if den > 0 else None


def scores(n_tp, n_fn, n_fp):
    recall = _ratio(n_tp, n_tp + n_fn)
    precision = _ratio(n_tp, n_tp + n_fp)
    if recall is None or precision is None or recall + precision == 0:
        f1 = None
    else:
        f1 = 2 * recall * precision / (recall + precision)
    return recall, precision, f1


def aggregate(items):
    """Sum counts over traces, then compute the ratios once.

    ``items`` may mix :class:`LabeledTrace` objects and ``(n_tp, n_fp,
    n_fn)`` triples; ATTF is only available for the former.
    """
    n_tp = n_fp = n_fn = 0
    attfs = []
    undefined = 0
    for item in items:
        if isinstance(item, LabeledTrace):
            c = classify(item)
            try:
                attfs.append(attf(item))
            except UndefinedMetricError:
                undefined += 1
        else:
            c = Counts(*item)
        n_tp += c.n_tp
        n_fp += c.n_fp
        n_fn += c.n_fn
    recall, precision, f1 = scores(n_tp, n_fn, n_fp)
    mean_attf = float(np.mean(attfs)) if attfs else None
    return EvalResult(n_tp, n_fn, n_fp, recall, precision, f1, mean_attf, undefined)


def f1_key(result):
    """Sort key ranking undefined F1 below every defined value."""
    return -np.inf if result.f1 is None else result.f1
