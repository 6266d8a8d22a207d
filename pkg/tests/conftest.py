import pytest
from hypothesis import settings

from conglab import fixtures

settings.register_profile("repeatable", derandomize=True, print_blob=True)
settings.load_profile("repeatable")


@pytest.fixture(scope="session")
def sys_a():
    return fixtures.sys_a()


@pytest.fixture(scope="session")
def sys_b():
    return fixtures.sys_b()


@pytest.fixture(scope="session")
def sys_c():
    return fixtures.sys_c()


@pytest.fixture(scope="session")
def sys_d():
    return fixtures.sys_d()


@pytest.fixture(scope="session")
def general_b():
    return fixtures.sys_b_general()


@pytest.fixture(scope="session")
def obstruction():
    return fixtures.obstruction_system()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        title, ok, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
