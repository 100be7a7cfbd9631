import numpy as np
import pytest

from cobase.datasets import SyntheticConfig, generate_synthetic

ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def small_archive():
    return generate_synthetic(SyntheticConfig(n_stations=2, n_days=120, M=5, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
