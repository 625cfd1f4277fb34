import itertools

import numpy as np
import pytest


def brute_pair_counts(Y, m, r):
    """All-pairs template matching in plain Python.

    Returns ordered-pair counts ``(A, B)`` at lengths ``m + 1`` and ``m``.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = Y.shape[0]
    templates = range(n - m)
    a = b = 0
    for i, j in itertools.permutations(templates, 2):
        if all(abs(Y[i + k, c] - Y[j + k, c]) <= r for k in range(m) for c in range(Y.shape[1])):
            b += 1
            if all(abs(Y[i + m, c] - Y[j + m, c]) <= r for c in range(Y.shape[1])):
                a += 1
    return a, b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config._criterion_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config._criterion_lines[number] = line
        print(line)
        assert ok, line

    return report
