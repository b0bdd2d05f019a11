"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "seen": False, "notes": []})
    if report.when == "call" or report.failed or report.skipped:
        entry["seen"] = True
        if not report.passed:
            entry["ok"] = False
            entry["notes"].append(f"{item.name}: {report.outcome}")
    for key, value in report.user_properties:
        if key == "detail":
            entry["notes"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] and entry["seen"] else "FAIL"
        line = f"criterion {number}: {status}  {entry['title']}"
        details = [n for n in entry["notes"] if n]
        if details:
            line += "  [" + "; ".join(dict.fromkeys(details)) + "]"
        terminalreporter.write_line(line)
