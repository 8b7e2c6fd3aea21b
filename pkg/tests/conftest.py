import sys
from pathlib import Path

import pytest

# shared oracles live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (title, phase outcomes of its tests)
_criteria: dict[int, tuple[str, list[str]]] = {}


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        number, title = m.args
        _, outcomes = _criteria.setdefault(number, (title, []))
        if call.when == "call" or report.outcome != "passed":
            outcomes.append(report.outcome)
    return report


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcomes = _criteria[number]
        ok = bool(outcomes) and all(o == "passed" for o in outcomes)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")
