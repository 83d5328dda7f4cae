import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# acceptance test id -> (label, outcome)
_criteria = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if "test_acceptance.py" in item.nodeid:
            doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
            _criteria[item.nodeid] = [doc, None]


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    if report.when == "call" or report.outcome != "passed":
        _criteria[report.nodeid][1] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in _criteria.values():
        verdict = {"passed": "PASS", None: "NOT RUN", "skipped": "SKIPPED"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"{verdict:7s} {label}")
