import random
import sys

import pytest
import sympy as sp

from nhfields.expr import JetChart


@pytest.fixture
def wave_chart():
    return JetChart(["t", "x"], ["y"])


@pytest.fixture
def field3_chart():
    return JetChart(["t", "x"], ["y1", "y2", "y3"])


@pytest.fixture
def particle_chart():
    return JetChart(["t"], ["x", "y", "z"])


@pytest.fixture
def rng():
    return random.Random(1234)


def syms(chart, *names):
    return [chart.symbol(n) for n in names]


def wave_density(chart):
    yt, yx = syms(chart, "y_t", "y_x")
    return sp.Rational(1, 2) * (yt**2 - yx**2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
