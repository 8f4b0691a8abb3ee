import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "ran": False, "notes": []})
    if rep.when == "call" or rep.failed:
        entry["ran"] = True
        entry["passed"] = entry["passed"] and rep.passed
    if rep.when == "call":
        entry["notes"].extend(f"{k}={v}" for k, v in item.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ran"] and e["passed"] else ("FAIL" if e["ran"] else "NOT RUN")
        notes = f" [{'; '.join(e['notes'])}]" if e["notes"] else ""
        terminalreporter.write_line(f"criterion {number}: {status} - {e['title']}{notes}")
