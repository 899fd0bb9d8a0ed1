import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "matching oracle equivalence",
    2: "negative-spread construction",
    3: "credit safety",
    4: "replay round trip",
    5: "generalized-t self-consistency",
    6: "fit recovery",
    7: "CvM correctness",
    8: "curve collapse, identity case",
    9: "curve collapse, affine family",
    10: "spectrum periodicity",
    11: "grouping rule",
    12: "quote-relative non-negativity",
}

_outcomes: dict = {}
_notes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): test belongs to acceptance criterion n")
    config.addinivalue_line("markers", "slow: long-running test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    n = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        # an expected failure still counts as a failed criterion
        _outcomes.setdefault(n, []).append(rep.passed and not hasattr(rep, "wasxfail"))
        if hasattr(rep, "wasxfail") and rep.skipped:
            _notes.setdefault(n, []).append(f"{item.name}: expected failure, {rep.wasxfail}")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, name in CRITERIA.items():
        res = _outcomes.get(n)
        if res is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(res) else "FAIL"
        tr.write_line(f"AC{n:02d} {status:7s} {name}")
        for note in _notes.get(n, []):
            tr.write_line(f"     {note}")
