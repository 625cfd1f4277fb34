"""Entropy-based software-aging indicators and failure detectors."""

from .agingmodel import (
    AgingModel, TraceGenerationError, TraceSpec, cumulative_failure, failure_probability,
    generate_suite, generate_trace, hazard, state_entropy,
)
from .detectors import (
    FailureThreshold, IncrementalFailureThreshold, IndicatorTrace, ShewhartDetector,
    run_detector, sweep,
)
from .entropy import (
    EntropyConfig, EntropyProfile, MMSETransformer, StreamingMMSE, UndefinedEntropyError,
    extended_sample_entropy, mmse, mse_profile, sample_entropy, window_profiles,
)
from .evaluation import EvalResult, LabeledTrace, UndefinedMetricError, aggregate, attf, classify
from .timeseries import MetricMatrix, SlidingWindow, coarse_grain, minmax_normalize
from .varselect import AnnealConfig, GCDSelector, anneal_select, elbow_report, gcd_score, pca

__version__ = "0.1.0"
