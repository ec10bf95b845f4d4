import pytest

from mfcair.config import data_path, load_params
from mfcair.params import derive_constants

ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def params():
    return load_params(data_path("params_default.ini"))


@pytest.fixture(scope="session")
def constants(params):
    return derive_constants(params)


@pytest.fixture
def record_criterion():
    def record(label, passed, detail=""):
        ACCEPTANCE_RESULTS.append((label, passed, detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
