import math

import numpy as np
import pytest

from smallball.spectrum import polynomial


@pytest.fixture(scope="session")
def poly2():
    return polynomial(2.0)


def brute_sum(f, n=2_000_000):
    """Plain summation of f(i) over i = 1..n with an Euler-Maclaurin tail for f ~ 1/i^2."""
    i = np.arange(1, n + 1, dtype=float)
    return float(np.sum(f(i)))


def coth_mu(c):
    """sum 1/(i^2 + c^2) = (pi c coth(pi c) - 1)/(2 c^2)."""
    x = math.pi * c
    return (x / math.tanh(x) - 1.0) / (2.0 * c * c)


def sinh_I(c):
    """I(c^2/2) for a_i = i, from prod (1 + c^2/i^2) = sinh(pi c)/(pi c)."""
    x = math.pi * c
    return 0.5 * math.log(math.sinh(x) / x) - 0.5 * c * c * coth_mu(c)


# acceptance summary: one line per criterion at the end of the run

_CRITERIA: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion tag")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            _CRITERIA.setdefault(value, []).append(report.outcome)


def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", f"{m.args[0]:>2}. {m.args[1]}"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda k: int(k.split(".")[0])):
        ok = all(o == "passed" for o in _CRITERIA[name])
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
