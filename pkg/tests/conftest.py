


import pytest
from hypothesis import settings

from mimcool.params import nominal_params, strong_params
from mimcool.steady import prepare, solve_at

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def acceptance():
    """Record one pass/fail line per criterion (printed in the terminal summary)."""
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


@pytest.fixture(scope="session")
def small():
    params, optics = prepare(nominal_params())
    return params, optics, solve_at(params, optics)


@pytest.fixture(scope="session")
def strong():
    params, optics = prepare(strong_params())
    return params, optics, solve_at(params, optics)


@pytest.fixture(scope="session")
def mech():
    return nominal_params().mech


@pytest.fixture(scope="session")
def bath():
    return nominal_params().bath


