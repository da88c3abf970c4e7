"""Shared pytest hooks.

Acceptance tests call the ``criterion`` fixture with their number, a short
title and a measured-value string; the terminal summary then prints one
PASS/FAIL line per criterion.
"""

import pytest

_results: dict[int, tuple[str, str, str]] = {}


@pytest.fixture
def criterion(request):
    info = {}

    def record(number, title, detail=""):
        info.update(number=number, title=title, detail=detail)
        request.node.user_properties.append(("criterion", (number, title)))
        request.node.user_properties.append(("detail", detail))

    return record


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    number, title = props["criterion"]
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        _results[number] = (status, title, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        status, title, detail = _results[number]
        line = f"[{status}] criterion {number:>2}: {title}"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)
