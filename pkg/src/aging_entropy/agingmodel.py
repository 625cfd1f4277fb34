"""Weibull aging model, two-state system entropy and synthetic aging traces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import ParameterError, check_int, check_positive
from .timeseries import MetricMatrix


@dataclass(frozen=True)
class AgingModel:
    """Weibull failure-rate model with scale ``alpha`` and shape ``beta_shape``.

    The defaults put the end of the observed lifetime (``horizon``) well
    before the point where failure and working probabilities meet.
    """

    alpha: float = 5.4e5
    beta_shape: float = 11.0
    horizon: float = 4.5e5

    def __post_init__(self):
        check_positive(self.alpha, "alpha")
        check_positive(self.beta_shape, "beta_shape")
        check_positive(self.horizon, "horizon")


def _times(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ParameterError("time must be non-negative")
    return t


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def hazard(model, t):
    """``h(t) = (b/a) (t/a)^(b-1) exp(-(t/a)^b)`` for shape b and scale a."""
    t = _times(t)
    a, b = model.alpha, model.beta_shape
    z = t / a
    return _out((b / a) * z ** (b - 1) * np.exp(-z ** b), t)


def cumulative_failure(model, t):
    """``F(t) = 1 - exp(-(t/a)^b)``."""
    t = _times(t)
    return _out(-np.expm1(-(t / model.alpha) ** model.beta_shape), t)


def failure_probability(model, t):
    """Probability of the failure state, ``h(t) * (1 - F(t))``.

    Equals ``(b/a) (t/a)^(b-1) exp(-2 (t/a)^b)``.
    """
    t = _times(t)
    a, b = model.alpha, model.beta_shape
    z = t / a
    return _out((b / a) * z ** (b - 1) * np.exp(-2.0 * z ** b), t)


def binary_entropy(p_fail):
    """``-(p ln p + (1-p) ln(1-p))`` with the ``0 ln 0 = 0`` convention."""
    p = np.asarray(p_fail, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ParameterError("probabilities must lie in [0, 1]")
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        hp = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        hq = np.where(q > 0, -q * np.log1p(-np.where(q > 0, p, 0.0)), 0.0)
    return _out(hp + hq, p)


def state_entropy(model, t):
    """Entropy of the working/failure state distribution at time ``t``.

    Zero at ``t = 0``, where the system is new.
    """
    return binary_entropy(failure_probability(model, t))


@dataclass(frozen=True)
class TraceSpec:
    """Recipe for one synthetic aging trace.

    The failure-state probability of slot ``i`` follows the model's
    ``p_f`` curve over ``[start_fraction * horizon, horizon]`` rescaled so
    its value at the horizon equals ``peak_failure_probability``.

    Attributes
    ----------
    model : AgingModel
    p : int
        Number of metric channels.
    length : int
        Number of simulated slots; the returned trace stops at the labeled
        failure point, so it can be shorter.
    noise_level : float
        Background noise amplitude relative to each channel's swing.
    seed : int
    pattern_amplitude : float
        Amplitude of the periodic workload pattern relative to the channel
        swing. Zero gives constant channels.
    failure_gain : float
        Amplitude of failure-state excursions relative to the channel swing.
    regime_switch : bool
        If True, failure-state slots drop the workload pattern instead of
        adding excursions on top of it.
    sustained_run : int
        Consecutive failure-state slots that constitute the labeled failure.
    force_healthy : bool
        Pin the failure probability to zero (no failure is labeled).
    """

    model: AgingModel = field(default_factory=AgingModel)
    p: int = 5
    length: int = 5000
    noise_level: float = 0.02
    seed: int = 0
    start_fraction: float = 0.45
    peak_failure_probability: float = 0.45
    pattern_amplitude: float = 1.0
    pattern_period: int = 240
    failure_gain: float = 0.1
    persistence: float = 2.0
    regime_switch: bool = True
    sustained_run: int = 10
    min_length: int = 1200
    force_healthy: bool = False

    def __post_init__(self):
        check_int(self.p, "p", low=1)
        check_int(self.length, "length", low=2)
        check_int(self.sustained_run, "sustained_run", low=1)
        check_int(self.pattern_period, "pattern_period", low=2)
        check_positive(self.noise_level, "noise_level", allow_zero=True)
        check_positive(self.pattern_amplitude, "pattern_amplitude", allow_zero=True)
        check_positive(self.failure_gain, "failure_gain", allow_zero=True)
        check_positive(self.persistence, "persistence", allow_zero=True)
        if not 0 <= self.start_fraction < 1:
            raise ParameterError("start_fraction must lie in [0, 1)")
        if not 0 < self.peak_failure_probability < 1:
            raise ParameterError("peak_failure_probability must lie in (0, 1)")
        if self.length < self.min_length:
            raise ParameterError(f"length {self.length} shorter than min_length {self.min_length}")

    def slot_times(self):
        h = self.model.horizon
        t0 = self.start_fraction * h
        return t0 + (h - t0) * np.arange(1, self.length + 1) / self.length

    def failure_curve(self):
        """Per-slot probability of being in the failure state."""
        if self.force_healthy:
            return np.zeros(self.length)
        pf = failure_probability(self.model, self.slot_times())
        return self.peak_failure_probability * pf / failure_probability(self.model,
                                                                        self.model.horizon)


class TraceGenerationError(RuntimeError):
    def __init__(self, message, max_failure_probability):
        self.max_failure_probability = float(max_failure_probability)
        super().__init__(f"{message} (max failure probability {self.max_failure_probability:.4g})")


# (offset, swing) per channel, so channels live on unrelated numeric ranges
_CHANNEL_SCALES = [(20.0, 60.0), (1.5e6, 2.0e6), (200.0, 300.0), (5.0e4, 1.0e5), (0.0, 15.0)]


def _channel_scale(i):
    base, swing = _CHANNEL_SCALES[i % len(_CHANNEL_SCALES)]
    return base, swing * (1 + i // len(_CHANNEL_SCALES))


def _draw_states(q, persistence, rng):
    """Two-state chain whose failure marginal tracks ``q``.

    The chance of staying in the failure state grows with ``q``, so long
    failure runs only appear late in the trace.
    """
    n = q.shape[0]
    states = np.zeros(n, dtype=bool)
    u = rng.random(n)
    prev = False
    for i in range(n):
        qi = q[i]
        stay = min(0.95, persistence * qi)
        if prev:
            cur = u[i] < stay
        else:
            enter = 0.0 if qi <= 0 else min(1.0, qi * (1 - stay) / max(1e-12, 1 - qi))
            cur = u[i] < enter
        states[i] = cur
        prev = cur
    return states


def _first_sustained_run(states, run):
    count = 0
    for i, s in enumerate(states):
        count = count + 1 if s else 0
        if count == run:
            return i - run + 1
    return None


def generate_trace(spec):
    """Simulate a metric trace that ages until a sustained failure.

    Each slot is in the working or the failure state. Working slots carry a
    per-channel periodic workload pattern plus background noise; failure
    slots add a large, weakly correlated excursion on every channel. The
    failure point is the first slot of a run of ``spec.sustained_run``
    failure-state slots and the trace ends there.

    Returns
    -------
    (MetricMatrix, int or None)
        ``None`` as the label only when ``spec.force_healthy`` is set.

    Raises
    ------
    TraceGenerationError
        If no sustained failure occurs within ``spec.length`` slots, or it
        occurs before ``spec.min_length``.
    """
    rng = np.random.default_rng(spec.seed)
    n, p = spec.length, spec.p
    q = spec.failure_curve()
    states = _draw_states(q, spec.persistence, rng)
    if spec.force_healthy:
        label = None
        stop = n
    else:
        label = _first_sustained_run(states, spec.sustained_run)
        if label is None:
            raise TraceGenerationError("no sustained failure before the horizon", q.max())
        if label < spec.min_length:
            raise TraceGenerationError(
                f"failure at slot {label} precedes min_length {spec.min_length}", q[label])
        stop = label + 1

    slots = np.arange(n)
    phases = rng.uniform(0, 2 * np.pi, size=p)
    shared = rng.normal(size=n)
    values = np.empty((n, p))
    names = []
    for c in range(p):
        base, swing = _channel_scale(c)
        pattern = 0.5 * (1 + np.sin(2 * np.pi * slots / spec.pattern_period + phases[c]))
        signal = spec.pattern_amplitude * pattern
        burst = spec.failure_gain * (0.3 * shared + 0.95 * rng.normal(size=n))
        if spec.regime_switch:
            # failure slots lose the workload pattern and wander around its mean
            failing = 0.5 * spec.pattern_amplitude + burst
        else:
            failing = signal + burst
        signal = np.where(states, failing, signal) + spec.noise_level * rng.normal(size=n)
        values[:, c] = base + swing * signal
        names.append(f"metric_{c}")
    return MetricMatrix(values[:stop], tuple(names), 60.0, slots[:stop]), label


def generate_suite(count, spec=None, first_seed=0, max_attempts=None):
    """Generate ``count`` traces from consecutive seeds.

    Seeds whose trace raises :class:`TraceGenerationError` are skipped.

    Returns
    -------
    list of (seed, MetricMatrix, label)
    """
    from dataclasses import replace

    spec = spec or TraceSpec()
    limit = max_attempts or 5 * count
    out = []
    seed = first_seed
    while len(out) < count:
        if seed - first_seed >= limit:
            raise TraceGenerationError(
                f"only {len(out)} of {count} traces after {limit} seeds", 0.0)
        try:
            matrix, label = generate_trace(replace(spec, seed=seed))
        except TraceGenerationError:
            pass
        else:
            out.append((seed, matrix, label))
        seed += 1
    return out
