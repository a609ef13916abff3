import numpy as np
import pytest

from _report import EXPECTED, RESULTS
from tscore.toy import train_toy_model


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in EXPECTED:
        if num in RESULTS:
            desc, ok = RESULTS[num]
            tr.write_line(f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {desc}")
        else:
            tr.write_line(f"criterion {num:2d} [not run]")


@pytest.fixture(scope="session")
def toy_model():
    """Moderately trained parabola model shared by the module tests."""
    return train_toy_model(n_samples=1500, seed=0, steps=2500)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
