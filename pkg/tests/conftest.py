from pathlib import Path

import numpy as np
import pytest

from dprox.objectives import generate_quadratic_ensemble

DATA = Path(__file__).parent / "data"


@pytest.fixture
def toy_libsvm() -> Path:
    return DATA / "toy200.libsvm"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def small_ensemble():
    return generate_quadratic_ensemble(seed=3, m=5, d=4, condition_target=8.0)


# one line per acceptance criterion, echoed after the run so it survives output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
