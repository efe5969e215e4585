import sys

import numpy as np
import pytest

from fgarch.function_space import Grid
from fgarch.presets import load_preset


@pytest.fixture(scope="session")
def grid():
    return Grid(285)


@pytest.fixture(scope="session")
def preset():
    return load_preset("paper_sim")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
