import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    for mod in list(sys.modules.values()):
        lines = getattr(mod, "ACCEPTANCE_RESULTS", None)
        if lines:
            terminalreporter.section("acceptance criteria")
            for n in sorted(lines):
                terminalreporter.write_line(lines[n])
            break
