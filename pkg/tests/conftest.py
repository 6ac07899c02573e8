import numpy as np
import pytest

from frobsia.catalog import get_entry


@pytest.fixture(scope="session")
def sw3():
    return get_entry("sw3")


@pytest.fixture(scope="session")
def sw4():
    return get_entry("sw4")


@pytest.fixture(scope="session")
def zero3():
    return get_entry("zero3")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA.append((props["criterion"], report.outcome, props.get("metrics", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, metrics in sorted(_CRITERIA, key=lambda c: int(c[0].split()[0])):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {name:<40} {status}  {metrics}")
