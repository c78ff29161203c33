import pytest

from dirac_ham.engine.report import analyze
from dirac_ham.frontend import load_preset

CRITERIA = range(1, 8)
_outcomes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test belongs to acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    n = marker.args[0]
    ok = rep.passed if rep.when == "call" else False
    _outcomes[n] = _outcomes.get(n, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in CRITERIA:
        if n in _outcomes:
            terminalreporter.write_line(f"criterion {n}: {'PASS' if _outcomes[n] else 'FAIL'}")
        else:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")


@pytest.fixture(scope="session")
def maxwell():
    return analyze(load_preset("eb-maxwell"))


@pytest.fixture(scope="session")
def potential():
    return analyze(load_preset("maxwell-a"))


@pytest.fixture(scope="session")
def gravity():
    return analyze(load_preset("eb-gravity"))
