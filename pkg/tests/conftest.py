import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# Outcome of each acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    criterion = dict(report.user_properties).get("criterion")
    if criterion is None or report.when != "call":
        return
    entry = ACCEPTANCE_RESULTS.setdefault(criterion, {"passed": True, "detail": []})
    entry["passed"] &= report.passed
    detail = dict(report.user_properties).get("detail")
    if detail and detail not in entry["detail"]:
        entry["detail"].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE_RESULTS):
        entry = ACCEPTANCE_RESULTS[criterion]
        status = "PASS" if entry["passed"] else "FAIL"
        detail = "; ".join(entry["detail"])
        terminalreporter.write_line(f"criterion {criterion:>2}: {status}  {detail}")
