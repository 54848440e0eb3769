import numpy as np
import pytest

from hopfkit.conjugate import view_for
from hopfkit.problem import catalog_lookup


def _pair(name, **kw):
    spec = catalog_lookup(name, **kw)
    return spec, view_for(spec)


@pytest.fixture(scope="session")
def log_pair():
    return _pair("log-example")


@pytest.fixture(scope="session")
def unit_pair():
    return _pair("log-example-unit")


@pytest.fixture(scope="session")
def sqrt_pair():
    return _pair("sqrt-example")


@pytest.fixture(scope="session")
def zero_pair():
    return _pair("zero-h")


@pytest.fixture(scope="session")
def linear_pair():
    return _pair("linear-sigma")


@pytest.fixture(scope="session")
def quad_pair():
    return _pair("quad-quad")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion; returns ``ok`` so tests can assert on it."""

    def record(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        _CRITERIA.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
