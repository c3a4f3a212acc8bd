"""Acceptance reporting: one PASS/FAIL line per criterion after the run."""

import pytest

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "passed": True, "notes": []})
    if rep.failed:
        entry["passed"] = False
    if rep.when == "call":
        entry["notes"].extend(v for k, v in item.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        status = "PASS" if entry["passed"] else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {entry['title']}")
        for note in entry["notes"]:
            terminalreporter.write_line(f"       {note}")


@pytest.fixture
def note(request):
    """Attach a line to the acceptance summary of the current criterion."""

    def add(text: str) -> None:
        request.node.user_properties.append(("acceptance", text))

    return add
