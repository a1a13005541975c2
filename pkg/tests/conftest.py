from pathlib import Path

import pytest

from guardagg import data_path, load_directory

DATA = Path(str(data_path()))
_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        prev = _ACCEPTANCE.get(number, (title, True))
        _ACCEPTANCE[number] = (title, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}")


@pytest.fixture(scope="session")
def suppliers():
    return load_directory(DATA / "suppliers")


@pytest.fixture(scope="session")
def suppliers_xy():
    return load_directory(DATA / "suppliers_xy")


@pytest.fixture(scope="session")
def median_sql():
    return (DATA / "queries" / "median_acctbal.sql").read_text()


@pytest.fixture(scope="session")
def piecewise_sql():
    return (DATA / "queries" / "min_sum_by_nation.sql").read_text()
