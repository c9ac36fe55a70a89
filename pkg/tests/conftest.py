from pathlib import Path

import pytest

from sessionkit.parser import parse_protocol_file

GOLDEN = Path(__file__).parent / "golden"


def load(name: str):
    path = GOLDEN / name
    return parse_protocol_file(path.read_text(), path.name)


@pytest.fixture
def buyer_seller():
    return load("buyer_seller.gp")


@pytest.fixture
def guessing_game():
    return load("guessing_game.gp")


# ---------------------------------------------------------------------------
# acceptance summary: one line per test marked with ``criterion``

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    passed = _CRITERIA.get(number, (title, True))[1] and not report.failed
    if report.when == "call" or report.failed:
        _CRITERIA[number] = (title, passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}")
