"""Shared fixtures and the per-criterion acceptance summary.

Tests marked ``@pytest.mark.criterion(n, "title")`` are grouped by ``n``; at
the end of the run one line per criterion reports PASS only if every test in
that group passed.
"""

from __future__ import annotations

import random
from collections import defaultdict

import pytest

_criteria: dict[int, dict] = defaultdict(lambda: {"title": "", "outcomes": []})


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        n, title = marker.args
        entry = _criteria[n]
        entry["title"] = title
        entry["outcomes"].append((item.name, report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        entry = _criteria[n]
        passed = all(o == "passed" for _, o, _ in entry["outcomes"])
        seconds = sum(d for _, _, d in entry["outcomes"])
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"criterion {n}: {status}  {entry['title']}  ({len(entry['outcomes'])} tests, {seconds:.1f}s)"
        )


@pytest.fixture
def rng():
    return random.Random(20240607)
