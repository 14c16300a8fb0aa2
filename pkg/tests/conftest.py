import sys

import pytest

from llmsat.console import Console
from llmsat.scenarios import build_world
from llmsat.world import SimConfig


def make_console(scenario: str = "A", seed: int = 0, **config) -> Console:
    return Console(build_world(scenario, seed=seed, config=SimConfig(**config)))


@pytest.fixture
def console() -> Console:
    return make_console()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.summary_lines():
        terminalreporter.write_line(line)
