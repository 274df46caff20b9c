import numpy as np
import pytest

from doublehopf import (builtin_epidemic, builtin_predprey, find_double_hopf, hopf_curve,
                        prepare_critical, expand_at, basis_for_point, assemble)


def locate_predprey(spec=None):
    spec = spec or builtin_predprey()
    sweep = np.linspace(0.55, 0.9, 36)
    low = hopf_curve(spec, 0, sweep, label="-")
    high = hopf_curve(spec, 0, sweep, label="+", j=1)
    return spec, find_double_hopf(low, high)[0]


def locate_epidemic(n1=1, n2=2, spec=None):
    spec = spec or builtin_epidemic()
    sweep = np.linspace(0.5, 60, 240)
    return spec, find_double_hopf(hopf_curve(spec, n1, sweep), hopf_curve(spec, n2, sweep))[0]


class Analysis:
    def __init__(self, spec, point):
        self.spec = spec
        self.point = point
        self.rescaled = prepare_critical(spec, point.param)
        self.basis = basis_for_point(self.rescaled, point)
        self.expansion = expand_at(self.rescaled)
        self.nf = assemble(self.rescaled, self.basis, self.expansion)


@pytest.fixture(scope="session")
def predprey_point():
    return locate_predprey()


@pytest.fixture(scope="session")
def epidemic_point():
    return locate_epidemic()


@pytest.fixture(scope="session")
def predprey_analysis(predprey_point):
    spec, pt = predprey_point
    return Analysis(spec, pt.swapped())


@pytest.fixture(scope="session")
def epidemic_analysis(epidemic_point):
    return Analysis(*epidemic_point)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line, then assert on it."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
