"""Shared pytest wiring: per-criterion result lines for the acceptance suite."""

import re

import pytest

_CRITERION_RE = re.compile(r"test_criterion_(\d+)")


def _store(config):
    if not hasattr(config, "_criterion_results"):
        config._criterion_results = {}
    return config._criterion_results


@pytest.fixture
def criterion_detail(request):
    """Let an acceptance test attach measured numbers to its summary line."""
    details = _store(request.config).setdefault("details", {})

    def record(number, text):
        details[int(number)] = text

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    match = _CRITERION_RE.search(item.name)
    if match and report.when == "call":
        results = _store(item.config).setdefault("outcomes", {})
        results[int(match.group(1))] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criterion_results", None)
    if not results or not results.get("outcomes"):
        return
    details = results.get("details", {})
    terminalreporter.section("acceptance criteria")
    for number in sorted(results["outcomes"]):
        outcome = results["outcomes"][number]
        word = "PASS" if outcome == "passed" else "FAIL"
        extra = details.get(number, "")
        terminalreporter.write_line(f"criterion {number:2d}: {word}  {extra}".rstrip())
