import re

import numpy as np
import pytest

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_")
_outcomes: dict[int, bool] = {}
_details: dict[int, list[str]] = {}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def note(request):
    """Attach a measured value to the acceptance summary line of the running criterion."""
    m = _CRITERION.search(request.node.nodeid)

    def add(text: str) -> None:
        if m:
            _details.setdefault(int(m.group(1)), []).append(text)

    return add


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or report.failed:
        _outcomes[n] = _outcomes.get(n, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status = "PASS" if _outcomes[n] else "FAIL"
        detail = "; ".join(_details.get(n, []))
        terminalreporter.write_line(f"criterion {n}: {status}" + (f" ({detail})" if detail else ""))
