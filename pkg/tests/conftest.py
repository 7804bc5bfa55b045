import numpy as np
import pytest

from forestlab.dgp import Dataset


def make_dataset(x, y):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float)
    return Dataset(x=x, y=y, signal=y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One summary line per acceptance criterion, with the measured values the
# test attached through ``record_property("measured", ...)``.
_CRITERIA: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        measured = "; ".join(str(v) for k, v in item.user_properties if k == "measured")
        _CRITERIA.append((marker.args[0], "PASS" if report.passed else "FAIL", measured))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, measured in _CRITERIA:
        line = f"{status}  {name}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)
