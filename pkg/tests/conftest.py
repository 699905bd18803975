"""Shared pytest wiring.

Tests marked with ``criterion("<name>")`` roll up into a per-criterion
pass/fail summary printed after the run, so the release gate is readable
at a glance without scanning individual test ids.
"""

import pytest

CRITERIA_ORDER = [
    "golden preprompt reproduction",
    "geometry accuracy",
    "projection fidelity",
    "curation pipeline",
    "embedding properties",
    "service contract",
]


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(name): names the release criterion a test verifies")
    config._criterion_by_nodeid = {}
    config._criterion_results = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            config._criterion_by_nodeid[item.nodeid] = marker.args[0]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    name = item.config._criterion_by_nodeid.get(item.nodeid)
    if name is None:
        return
    results = item.config._criterion_results.setdefault(
        name, {"passed": 0, "failed": 0})
    if report.failed:
        results["failed"] += 1
    elif report.when == "call" and report.passed:
        results["passed"] += 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criterion_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    names = [n for n in CRITERIA_ORDER if n in results]
    names += sorted(set(results) - set(CRITERIA_ORDER))
    for name in names:
        counts = results[name]
        verdict = "FAIL" if counts["failed"] else "PASS"
        terminalreporter.write_line(
            f"{verdict}  {name}  "
            f"({counts['passed']} passed, {counts['failed']} failed)")
