import sys
from pathlib import Path

import pytest

from promptvm.backends import RuleBackend
from promptvm.promptc import compile_program
from promptvm.tm import parse_tm, u15_2

TESTS = Path(__file__).parent
MACHINES = TESTS / "machines"
sys.path.insert(0, str(TESTS))

_acceptance: dict[int, tuple[str, list[str]]] = {}


def load_machine(name):
    return parse_tm((MACHINES / f"{name}.tm").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def u15():
    return u15_2()


@pytest.fixture(scope="session")
def u15_program(u15):
    return compile_program(u15)


@pytest.fixture
def rule():
    return RuleBackend()


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker
    _, outcomes = _acceptance.setdefault(number, (title, []))
    outcomes.append("pass" if report.passed else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().acceptance = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, outcomes = _acceptance[number]
        verdict = "PASS" if outcomes and all(o == "pass" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {title}")
