import sys

import numpy as np
import pytest

from conewave.waves import TorusDomain


@pytest.fixture
def dom64():
    return TorusDomain(2, 64.0, 128)


@pytest.fixture
def dom128():
    return TorusDomain(2, 128.0, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)



def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
