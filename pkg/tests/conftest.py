import pytest

_results: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _results.setdefault(n, [title, True, 0])
    if rep.failed or (rep.when == "call" and rep.skipped):
        entry[1] = False
    if rep.when == "call":
        entry[2] += 1


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        title, ok, ran = _results[n]
        verdict = "PASS" if ok and ran else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}  {title}")
