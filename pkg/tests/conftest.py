import numpy as np
import pytest

from lgptail.density import make_grid
from lgptail.lowrank import build_lambda_grid, make_knots

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture(scope="session")
def lambda_grid():
    return build_lambda_grid(make_knots(11), make_grid(101))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {status}  {detail}")
