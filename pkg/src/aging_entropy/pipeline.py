"""End-to-end pipeline: ingest, select metrics, stream MMSE, step detectors."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
import json
import logging
import math

import numpy as np

from ._validation import ParameterError
from .detectors import (
    FAMILIES, LOWER, UPPER, ShewhartDetector, ft_step, ft_train, ftx_step, ftx_train,
    shewhart_init, shewhart_step,
)
from .entropy import EntropyConfig, StreamingMMSE
from .evaluation import DECISION_WINDOW, LabeledTrace, aggregate
from .io import ReportWriter, ingest, read_labels, trace_name, write_table
from .timeseries import SlidingWindow
from .varselect import AnnealConfig, anneal_select

log = logging.getLogger(__name__)

STAGES = ("config", "ingest", "selection", "entropy", "detection", "evaluation", "output")


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` is one of :data:`STAGES`."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


@dataclass
class PipelineConfig:
    """Flat pipeline settings.

    ``metrics`` is ``"all"``, ``"auto"`` (GCD selection of ``select_k``
    metrics on the first ``select_rows`` rows of the first input) or a list
    of column names. ``detectors`` lists the families to run; threshold
    detectors train on the first ``training_steps`` CE values of a trace.
    """

    inputs: list = field(default_factory=list)
    metrics: object = "all"
    select_k: int = 5
    select_rows: int = 1000
    anneal_temperature: float = 1.0
    anneal_cooling: float = 0.99
    anneal_iterations: int = 5000
    seed: int = 0
    m: int = 2
    n_scales: int = 10
    r_factor: float = 0.15
    window: int = 1000
    stride: int = 1
    detectors: list = field(default_factory=lambda: ["ft", "ftx", "shewhart"])
    mode: str = UPPER
    ft_beta: float = 2.0
    ftx_beta: float = 1.1
    shewhart_window: int = 6
    epsilon: float = 6.5
    p_run: int = 4
    training_steps: int = 100
    decision_window: int = DECISION_WINDOW
    label_path: str = None
    reports: str = "reports.jsonl"
    summary: str = None

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path, overrides=None):
        with open(path) as fh:
            d = json.load(fh)
        d.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(d)

    def validate(self):
        if not self.detectors:
            raise ParameterError("at least one detector must be configured")
        for name in self.detectors:
            if name not in FAMILIES:
                raise ParameterError(f"unknown detector {name!r}")
        if self.mode not in (UPPER, LOWER):
            raise ParameterError(f"mode must be 'upper' or 'lower', got {self.mode!r}")
        if not (self.metrics in ("all", "auto") or isinstance(self.metrics, list)):
            raise ParameterError("metrics must be 'all', 'auto' or a list of names")
        if self.training_steps < 1:
            raise ParameterError("training_steps must be >= 1")
        self.entropy_config()
        self.anneal_config()

    def entropy_config(self):
        return EntropyConfig(self.m, self.n_scales, self.r_factor,
                             SlidingWindow(self.window, self.stride))

    def anneal_config(self):
        return AnnealConfig(self.anneal_temperature, self.anneal_cooling,
                            self.anneal_iterations, self.seed)

    def to_dict(self):
        return asdict(self)


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass(frozen=True)
class DetectionReport:
    """One verdict of one detector at one CE step.

    ``phase`` is ``"training"`` while a threshold detector is still
    collecting its training values (the verdict is then always False).
    """

    timestamp: int
    detector: str
    verdict: bool
    ce: float
    ft: float = None
    d_n: float = None
    changes_seen: int = None
    trace: str = None
    phase: str = "online"

    def as_dict(self):
        d = {"timestamp": int(self.timestamp), "detector": self.detector,
             "verdict": bool(self.verdict), "ce": _num(self.ce), "phase": self.phase}
        if self.ft is not None:
            d["ft"] = _num(self.ft)
        if self.d_n is not None:
            d["d_n"] = _num(self.d_n)
        if self.changes_seen is not None:
            d["changes_seen"] = int(self.changes_seen)
        if self.trace is not None:
            d["trace"] = self.trace
        return d


class _ThresholdRunner:
    def __init__(self, name, beta, mode, training_steps):
        self.name, self.beta, self.mode = name, beta, mode
        self.training_steps = training_steps
        self.buffer = []
        self.state = None

    def step(self, ts, ce, trace):
        if self.state is None:
            self.buffer.append(ce)
            if len(self.buffer) == self.training_steps:
                train = ft_train if self.name == "ft" else ftx_train
                self.state = train(self.buffer, self.beta, self.mode)
            return DetectionReport(ts, self.name, False, ce, trace=trace, phase="training")
        if self.name == "ft":
            verdict = ft_step(self.state, ce)
        else:
            verdict = ftx_step(self.state, ce)
        return DetectionReport(ts, self.name, verdict, ce, ft=self.state.ft, trace=trace)


class _ShewhartRunner:
    name = "shewhart"

    def __init__(self, window, epsilon, p_run):
        self.state = shewhart_init(window, epsilon, p_run)

    def step(self, ts, ce, trace):
        verdict = shewhart_step(self.state, ce)
        return DetectionReport(ts, self.name, verdict, ce, d_n=self.state.last_deviation,
                               changes_seen=self.state.changes_seen, trace=trace)


class StreamingPipeline:
    """Row-at-a-time MMSE plus detector fan-out for one trace.

    :meth:`push` returns the list of reports produced by that row (empty
    until a window completes on the stride).
    """

    def __init__(self, cfg, trace=None):
        self.cfg = cfg
        self.trace = trace
        self.mmse = StreamingMMSE(cfg.entropy_config())
        self.runners = []
        for name in cfg.detectors:
            if name == "shewhart":
                self.runners.append(_ShewhartRunner(cfg.shewhart_window, cfg.epsilon, cfg.p_run))
            else:
                beta = cfg.ft_beta if name == "ft" else cfg.ftx_beta
                self.runners.append(_ThresholdRunner(name, beta, cfg.mode, cfg.training_steps))
        self.profiles = []

    def push(self, row, timestamp):
        try:
            profile = self.mmse.push(row, timestamp)
        except Exception as exc:
            raise PipelineError("entropy", f"{type(exc).__name__}: {exc}") from exc
        if profile is None:
            return []
        self.profiles.append(profile)
        try:
            return [r.step(profile.window_end, profile.composed, self.trace)
                    for r in self.runners]
        except Exception as exc:
            raise PipelineError("detection", f"{type(exc).__name__}: {exc}") from exc


def _select_metrics(cfg, matrix):
    if cfg.metrics == "all":
        return list(matrix.metric_names)
    if cfg.metrics == "auto":
        try:
            prefix = matrix.values[:cfg.select_rows]
            res = anneal_select(prefix, cfg.select_k, cfg.anneal_config())
        except Exception as exc:
            raise PipelineError("selection", str(exc)) from exc
        names = [matrix.metric_names[i] for i in res.indices]
        log.info("selected metrics (GCD %.4f): %s", res.gcd, ", ".join(names))
        return names
    missing = [n for n in cfg.metrics if n not in matrix.metric_names]
    if missing:
        raise PipelineError("config", f"metrics not in input header: {', '.join(missing)}")
    return list(cfg.metrics)


def evaluate_reports(records, labels, decision_window=DECISION_WINDOW):
    """Score report records (dicts) against ``{trace: failure_point}``.

    Training-phase records are skipped. Returns ``{detector: EvalResult}``.
    """
    grouped = {}
    for rec in records:
        if rec.get("phase") == "training":
            continue
        key = (rec["detector"], rec.get("trace"))
        grouped.setdefault(key, []).append((rec["timestamp"], rec["verdict"]))
    per_detector = {}
    for (det, trace), rows in sorted(grouped.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        if trace not in labels:
            raise ParameterError(f"no failure label for trace {trace!r}")
        ts, verdicts = zip(*rows)
        per_detector.setdefault(det, []).append(
            LabeledTrace(np.array(ts), np.array(verdicts), labels[trace], decision_window))
    return {det: aggregate(items) for det, items in per_detector.items()}


def run_pipeline(cfg, writer=None):
    """Run every input through selection, MMSE and the detector roster.

    Reports are written to ``cfg.reports`` (or ``writer``) as they are
    produced. Returns a summary dict; when ``cfg.label_path`` is set it
    includes per-detector evaluation results.

    Raises
    ------
    PipelineError
        Naming the failing stage; reports written so far are flushed.
    """
    try:
        cfg.validate()
    except ParameterError as exc:
        raise PipelineError("config", str(exc)) from exc
    if not cfg.inputs:
        raise PipelineError("config", "no input files")
    own_writer = writer is None
    if own_writer:
        try:
            writer = ReportWriter(cfg.reports)
        except OSError as exc:
            raise PipelineError("output", str(exc)) from exc
    records = []
    summary = {"selected_metrics": None, "windows": {}}
    try:
        names = None
        for path in cfg.inputs:
            try:
                matrix = ingest(path)
            except (OSError, ParameterError) as exc:
                raise PipelineError("ingest", f"{path}: {exc}") from exc
            if names is None:
                names = _select_metrics(cfg, matrix)
                summary["selected_metrics"] = names
            elif any(n not in matrix.metric_names for n in names):
                raise PipelineError("config", f"{path}: selected metrics missing from header")
            sub = matrix.select(names)
            trace = trace_name(path) if len(cfg.inputs) > 1 or cfg.label_path else None
            stream = StreamingPipeline(cfg, trace)
            for ts, row in zip(sub.timestamps, sub.values):
                for rep in stream.push(row, ts):
                    try:
                        writer.write(rep)
                    except OSError as exc:
                        raise PipelineError("output", str(exc)) from exc
                    records.append(rep.as_dict())
            summary["windows"][trace or trace_name(path)] = len(stream.profiles)
    finally:
        writer.flush()
        if own_writer:
            writer.close()

    if cfg.label_path:
        try:
            labels = read_labels(cfg.label_path)
            results = evaluate_reports(records, labels, cfg.decision_window)
        except (OSError, ParameterError) as exc:
            raise PipelineError("evaluation", str(exc)) from exc
        summary["evaluation"] = {d: r.as_dict() for d, r in results.items()}
    if cfg.summary:
        try:
            with open(cfg.summary, "w") as fh:
                json.dump(summary, fh, indent=2, sort_keys=True)
        except OSError as exc:
            raise PipelineError("output", str(exc)) from exc
    return summary


SWEEP_PARAMS = {"ft": ["beta", "mode"], "ftx": ["beta", "mode"], "shewhart": ["window", "epsilon"]}
METRIC_COLUMNS = ["recall", "precision", "f1", "attf"]


def export_plotdata(kind, results, path):
    """Write plot-ready CSV tables.

    kind
        ``"profile"``: an EntropyProfile, one ``scale, entropy`` row per scale.
        ``"elbow"``: rows of :func:`~aging_entropy.varselect.elbow_report`.
        ``"sweep"``: a SweepResult, one row per grid cell.
        ``"series"``: a list of report dicts, one row per timestamp with a
        ``ce`` column and one verdict column per detector.
    """
    if kind == "profile":
        rows = [] if results is None else [
            (tau, float(v)) for tau, v in enumerate(results.per_scale, start=1)]
        header = ["scale", "entropy"]
    elif kind == "elbow":
        header = ["k", "best_gcd", "indices"]
        rows = [(k, g, " ".join(map(str, idx))) for k, g, idx in (results or [])]
    elif kind == "sweep":
        params = SWEEP_PARAMS.get(results.family, []) if results is not None else []
        cells = results.cells if results is not None else []
        if cells:
            params = list(cells[0].params)
        header = params + METRIC_COLUMNS
        rows = [[c.params[p] for p in params] + [getattr(c.result, m) for m in METRIC_COLUMNS]
                for c in cells]
    elif kind == "series":
        records = results or []
        dets = sorted({r["detector"] for r in records})
        header = ["timestamp", "ce"] + [f"verdict_{d}" for d in dets]
        by_ts = {}
        for r in records:
            row = by_ts.setdefault(r["timestamp"], {"ce": r["ce"]})
            row[r["detector"]] = int(r["verdict"])
        rows = [[ts, v["ce"]] + [v.get(d) for d in dets] for ts, v in sorted(by_ts.items())]
    else:
        raise ParameterError(f"unknown plot-data kind {kind!r}")
    write_table(path, header, rows)
    return path
