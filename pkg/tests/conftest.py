"""Acceptance summary: one PASS/FAIL line per criterion at the end of the run."""
import pytest

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(rep.user_properties).get("detail", "")
        prev_ok, prev_detail = _RESULTS.get(name, (True, ""))
        if rep.skipped:
            return
        if not rep.passed:
            # the first failure explains the verdict
            _RESULTS[name] = (False, prev_detail if not prev_ok else _first_line(rep))
        else:
            _RESULTS[name] = (prev_ok, prev_detail if (prev_detail or not prev_ok) else detail)


def _first_line(rep):
    text = str(rep.longrepr or "").strip().splitlines()
    err = [t for t in text if t.startswith("E ")]
    return (err[0][1:].strip() if err else (text[-1] if text else "failed"))[:200]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in _RESULTS.items():
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line += f"  -- {detail}"
        terminalreporter.write_line(line)
