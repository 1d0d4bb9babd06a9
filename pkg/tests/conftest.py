from collections import defaultdict

import pytest

_results = defaultdict(list)  # criterion number -> [(test name, passed, note)]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        note = ""
        if rep.failed:
            note = str(rep.longrepr.reprcrash.message).splitlines()[0] if hasattr(rep.longrepr, "reprcrash") else "failed"
        _results[mark.args[0]].append((item.name, rep.passed, note))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        rows = _results[n]
        ok = all(passed for _, passed, _ in rows)
        failed = [f"{name}: {note}" for name, passed, note in rows if not passed]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += "  (" + "; ".join(failed) + ")"
        tr.write_line(line)
