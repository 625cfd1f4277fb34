"""Command-line entry point: ``aging-entropy <verb> [options]``.

Exit codes: 0 success, 2 usage error, and one code per failing stage
(see :data:`EXIT_CODES`).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings

import numpy as np

from ._validation import ParameterError
from .agingmodel import AgingModel, TraceSpec, generate_suite
from .detectors import FAMILIES, IndicatorTrace, sweep
from .entropy import window_profiles
from .io import ingest, read_labels, read_reports, trace_name, write_matrix, write_table
from .pipeline import (
    PipelineConfig, PipelineError, evaluate_reports, export_plotdata, run_pipeline,
)
from .varselect import AnnealConfig, elbow_report

EXIT_CODES = {"config": 3, "ingest": 4, "selection": 5, "entropy": 6, "detection": 7,
              "evaluation": 8, "output": 9}

log = logging.getLogger("aging_entropy")

# config keys that can be overridden from the command line
_OVERRIDES = (
    "m", "n_scales", "r_factor", "window", "stride", "select_k", "select_rows", "seed", "mode",
    "ft_beta", "ftx_beta", "shewhart_window", "epsilon", "p_run", "training_steps",
    "decision_window", "label_path", "reports", "summary",
)


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _add_entropy_flags(p):
    p.add_argument("--m", type=int)
    p.add_argument("--n-scales", dest="n_scales", type=int)
    p.add_argument("--r-factor", dest="r_factor", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="aging-entropy",
                                     description="Entropy-based aging failure detection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("select", help="GCD elbow report over subset sizes")
    p.add_argument("input")
    p.add_argument("--rows", type=int, help="use only the first ROWS rows")
    p.add_argument("--k-max", type=int)
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("analyze", help="composed entropy over a metric trace")
    p.add_argument("input")
    p.add_argument("--metrics", help="comma-separated column names")
    _add_entropy_flags(p)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("detect", help="full pipeline from a config file")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--input", action="append", dest="inputs")
    p.add_argument("--detectors", help="comma-separated subset of ft,ftx,shewhart")
    p.add_argument("--metrics", help="'all', 'auto' or comma-separated names")
    _add_entropy_flags(p)
    for key in ("select_k", "select_rows", "seed", "shewhart_window", "p_run",
                "training_steps", "decision_window"):
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=int)
    for key in ("ft_beta", "ftx_beta", "epsilon"):
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    p.add_argument("--mode", choices=["upper", "lower"])
    p.add_argument("--labels", dest="label_path")
    p.add_argument("--reports")
    p.add_argument("--summary")

    p = sub.add_parser("generate", help="synthetic aging traces")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int, default=5000)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--noise-level", type=float, default=0.02)
    p.add_argument("--failure-gain", type=float)
    p.add_argument("--alpha", type=float, default=5.4e5)
    p.add_argument("--shape", type=float, default=11.0)
    p.add_argument("--horizon", type=float, default=4.5e5)
    p.add_argument("-o", "--output-dir", required=True)

    p = sub.add_parser("evaluate", help="score report records against labels")
    p.add_argument("reports")
    p.add_argument("--labels", required=True)
    p.add_argument("--decision-window", type=int, default=100)
    p.add_argument("-o", "--output")

    p = sub.add_parser("sweep", help="detector parameter grid over labeled traces")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--labels", required=True)
    p.add_argument("--family", choices=sorted(FAMILIES), default="shewhart")
    p.add_argument("--betas", type=_floats, default=[round(1 + 0.1 * i, 2) for i in range(11)])
    p.add_argument("--mode", choices=["upper", "lower"], default="upper")
    p.add_argument("--windows", type=_ints, default=[2, 4, 6, 8, 10, 12, 14, 16, 18, 20])
    p.add_argument("--epsilons", type=_floats,
                   default=[0.5 * i for i in range(1, 15)])
    p.add_argument("--decision-window", type=int, default=100)
    _add_entropy_flags(p)
    p.add_argument("-o", "--output", required=True)
    return parser


def _entropy_cfg(args):
    base = PipelineConfig()
    for key in ("m", "n_scales", "r_factor", "window", "stride"):
        if getattr(args, key, None) is not None:
            setattr(base, key, getattr(args, key))
    return base.entropy_config()


def cmd_select(args):
    try:
        matrix = ingest(args.input)
    except (OSError, ParameterError) as exc:
        raise PipelineError("ingest", str(exc)) from exc
    values = matrix.values if args.rows is None else matrix.values[:args.rows]
    k_max = args.k_max or values.shape[1]
    try:
        rows = elbow_report(values, range(1, k_max + 1),
                            AnnealConfig(max_iterations=args.iterations, seed=args.seed))
    except ParameterError as exc:
        raise PipelineError("selection", str(exc)) from exc
    for k, g, idx in rows:
        log.info("k=%d gcd=%.4f %s", k, g, ",".join(matrix.metric_names[i] for i in idx))
    export_plotdata("elbow", rows, args.output)


def cmd_analyze(args):
    try:
        cfg = _entropy_cfg(args)
    except ParameterError as exc:
        raise PipelineError("config", str(exc)) from exc
    try:
        matrix = ingest(args.input)
        if args.metrics:
            matrix = matrix.select(args.metrics.split(","))
    except (OSError, ParameterError) as exc:
        raise PipelineError("ingest", str(exc)) from exc
    try:
        profiles = window_profiles(matrix, cfg)
    except ParameterError as exc:
        raise PipelineError("entropy", str(exc)) from exc
    if not profiles:
        raise PipelineError(
            "entropy", f"{len(matrix)} rows cannot fill a {cfg.window.length}-row window")
    header = ["timestamp", "ce", "undefined_scales"] + [
        f"scale_{t}" for t in range(1, cfg.n_scales + 1)]
    rows = [[p.window_end, p.composed, " ".join(map(str, p.undefined_scales)),
             *p.per_scale.tolist()] for p in profiles]
    try:
        write_table(args.output, header, rows)
    except OSError as exc:
        raise PipelineError("output", str(exc)) from exc


def cmd_detect(args):
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    if args.inputs:
        overrides["inputs"] = args.inputs
    if args.detectors:
        overrides["detectors"] = args.detectors.split(",")
    if args.metrics:
        overrides["metrics"] = (args.metrics if args.metrics in ("all", "auto")
                                else args.metrics.split(","))
    try:
        if args.config:
            cfg = PipelineConfig.from_json(args.config, overrides)
        else:
            cfg = PipelineConfig.from_dict({k: v for k, v in overrides.items()
                                            if v is not None})
    except (OSError, ValueError, TypeError) as exc:
        raise PipelineError("config", str(exc)) from exc
    summary = run_pipeline(cfg)
    print(json.dumps(summary, indent=2, sort_keys=True))


def cmd_generate(args):
    os.makedirs(args.output_dir, exist_ok=True)
    kw = {"length": args.length, "p": args.p, "noise_level": args.noise_level}
    if args.failure_gain is not None:
        kw["failure_gain"] = args.failure_gain
    try:
        model = AgingModel(args.alpha, args.shape, args.horizon)
        base = TraceSpec(model=model, **kw)
    except ParameterError as exc:
        raise PipelineError("config", str(exc)) from exc
    suite = generate_suite(args.count, base, first_seed=args.seed)
    labels = []
    for seed, matrix, label in suite:
        name = f"trace_{seed:04d}"
        write_matrix(matrix, os.path.join(args.output_dir, name + ".csv"))
        labels.append((name, label))
    write_table(os.path.join(args.output_dir, "labels.csv"), ["trace", "failure_point"], labels)
    log.info("wrote %d traces to %s", len(labels), args.output_dir)


def cmd_evaluate(args):
    try:
        records = read_reports(args.reports)
        labels = read_labels(args.labels)
    except (OSError, ValueError) as exc:
        raise PipelineError("ingest", str(exc)) from exc
    try:
        results = evaluate_reports(records, labels, args.decision_window)
    except ParameterError as exc:
        raise PipelineError("evaluation", str(exc)) from exc
    out = {d: r.as_dict() for d, r in results.items()}
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_sweep(args):
    try:
        cfg = _entropy_cfg(args)
        labels = read_labels(args.labels)
    except (OSError, ParameterError) as exc:
        raise PipelineError("config", str(exc)) from exc
    traces = []
    for path in args.inputs:
        name = trace_name(path)
        if name not in labels:
            raise PipelineError("config", f"no label for {name}")
        try:
            profiles = window_profiles(ingest(path), cfg)
        except (OSError, ParameterError) as exc:
            raise PipelineError("entropy", f"{path}: {exc}") from exc
        traces.append(IndicatorTrace(np.array([p.window_end for p in profiles]),
                                     np.array([p.composed for p in profiles]), labels[name]))
    if args.family == "shewhart":
        grid = {"window": args.windows, "epsilon": args.epsilons}
    else:
        grid = {"beta": args.betas, "mode": [args.mode]}
    try:
        result = sweep(args.family, grid, traces, decision_window=args.decision_window)
    except ParameterError as exc:
        raise PipelineError("evaluation", str(exc)) from exc
    best = result.best
    log.info("best cell %s f1=%s", best.params, best.result.f1)
    export_plotdata("sweep", result, args.output)


COMMANDS = {"select": cmd_select, "analyze": cmd_analyze, "detect": cmd_detect,
            "generate": cmd_generate, "evaluate": cmd_evaluate, "sweep": cmd_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        COMMANDS[args.verb](args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES[exc.stage]
    return 0


if __name__ == "__main__":
    sys.exit(main())
