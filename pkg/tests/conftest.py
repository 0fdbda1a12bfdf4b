import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("lfd", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lfd")


@pytest.fixture(scope="session")
def grid17():
    from lfd.grid import build_grid
    return build_grid(6.0, 17)


@pytest.fixture(scope="session")
def grid9():
    from lfd.grid import build_grid
    return build_grid(4.0, 9)


@pytest.fixture
def rng():
    return np.random.default_rng(20241014)


def pytest_terminal_summary(terminalreporter):
    lines = [value for reports in terminalreporter.stats.values() for rep in reports
             for key, value in getattr(rep, "user_properties", ()) if key == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines)):
            terminalreporter.write_line(line)
