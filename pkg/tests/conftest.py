from __future__ import annotations

import pytest

from rvpp import default_scenario_path, load_scenario

_ACCEPTANCE: list[tuple[str, str]] = []


@pytest.fixture(scope="session")
def bundle():
    """The shipped scenario file, parsed once per session."""
    return load_scenario(default_scenario_path())


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome == "failed"):
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _ACCEPTANCE:
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{name}: {verdict}")
