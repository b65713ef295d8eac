import pytest

# criterion number -> list of (test id, passed)
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    _CRITERIA.setdefault(number, {"title": title, "results": []})
    _CRITERIA[number]["results"].append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if all(entry["results"]) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}")
