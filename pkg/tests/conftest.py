import numpy as np
import pytest

from yaglom.critical import critical_point
from yaglom.model import FluidModel, example1, example2


def four_phase_s0():
    """One zero-rate phase with a fast T00, so s* sits above its abscissa."""
    T = np.array(
        [[-3, 1, 2, 0], [1, -2.5, 0.5, 1], [4, 3, -10, 3], [0, 1, 1, -2.0]]
    )
    return FluidModel(T, np.array([1.5, -1, 0, -2]))


def two_up_two_down():
    T = np.array(
        [[-2, 0.5, 1, 0.5], [0.5, -1.5, 0.5, 0.5], [1, 1, -3, 1], [0.5, 0.5, 1, -2.0]]
    )
    return FluidModel(T, np.array([0.5, 1, -2, -1.5]))


CORPUS = {
    "ex1_a2": lambda: example1(2, 1),
    "ex1_a3": lambda: example1(3, 1),
    "ex1_a4": lambda: example1(4, 1),
    "ex2": example2,
    "s0": four_phase_s0,
    "two_up": two_up_two_down,
}

_cp_cache = {}


def corpus_model(name):
    return CORPUS[name]()


def corpus_critical(name):
    if name not in _cp_cache:
        m = corpus_model(name)
        _cp_cache[name] = (m, critical_point(m))
    return _cp_cache[name]


@pytest.fixture(params=sorted(CORPUS))
def corpus(request):
    """(name, model, critical point) for every corpus model."""
    m, cp = corpus_critical(request.param)
    return request.param, m, cp


@pytest.fixture
def ex1():
    return corpus_critical("ex1_a3")


@pytest.fixture
def ex2():
    return corpus_critical("ex2")


# -- acceptance report ------------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one ``PASS/FAIL criterion N: ...`` line; returns ``ok``."""

    def record(number, ok, text):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
