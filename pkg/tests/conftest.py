from collections import defaultdict

import pytest

_criteria: dict[int, list[tuple[str, str]]] = defaultdict(list)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    num = getattr(report, "criterion", None)
    if num is not None:
        _criteria[num].append((report.nodeid.split("::")[-1], report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep.criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_criteria):
        runs = _criteria[num]
        bad = [name for name, outcome in runs if outcome != "passed"]
        status = "PASS" if not bad else "FAIL"
        detail = f"{len(runs)} test(s)" if not bad else "failing: " + ", ".join(bad)
        tr.write_line(f"criterion {num}: {status} ({detail})")
