"""Collects one verdict line per acceptance criterion and prints them at the end."""
import pytest

_details = {}
_outcomes = {}


@pytest.fixture
def verdict(request):
    """Record measured values for the criterion named by the test's ``criterion`` marker."""
    number = request.node.get_closest_marker("criterion").args[0]

    def record(text):
        _details[number] = text

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    n = getattr(report, "_criterion", None)
    if n is None:
        return
    if report.when == "call" or report.outcome == "failed":
        _outcomes[n] = report.outcome if _outcomes.get(n) != "failed" else "failed"
    elif report.outcome == "skipped":
        _outcomes.setdefault(n, "skipped")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result()._criterion = m.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_outcomes):
        status = "PASS" if _outcomes[n] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {_details.get(n, '')}".rstrip())
