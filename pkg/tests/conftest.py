import numpy as np
import pytest

_CRITERIA: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "ran": False})
    if report.when == "call":
        entry["ran"] = True
    if report.failed:
        entry["ok"] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        verdict = "PASS" if e["ok"] and e["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {e['title']}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
