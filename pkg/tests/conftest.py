import numpy as np
import pytest

from postrobust import canonical_problem

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def canonical():
    return canonical_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record(request):
    """Store one PASS/FAIL line per acceptance criterion for the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def _record(number, title, ok, detail):
        lines[number] = f"{'PASS' if ok else 'FAIL'}  {number}. {title}: {detail}"
        print(lines[number])

    return _record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
