import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from presbysim.controller import ControllerConfig, new_state  # noqa: E402
from presbysim.optics import AgeMode, WearerProfile  # noqa: E402


@pytest.fixture
def cfg():
    return ControllerConfig()


@pytest.fixture
def emmetrope():
    return WearerProfile(20.0)


@pytest.fixture
def forties_state(cfg, emmetrope):
    return new_state(AgeMode.FORTIES, emmetrope, cfg)


ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        name, ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {name}: {detail}")
