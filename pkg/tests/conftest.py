import warnings

import numpy as np
import pytest

from quadfloquet import engines as en
from quadfloquet import powder as pw
from quadfloquet.params import quad_frequency, time_grid

W1 = 2 * np.pi * 1e5  # omega1 for omega1/2pi = 100 kHz

# lines appended by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def signal(engine: str, cq_hz: float, times, phase: float = 0.0, omega1: float = W1) -> np.ndarray:
    """Complex single-crystal signal of a named engine."""
    return en.parse_engine(engine, omega1, phase).batch(np.array([quad_frequency(cq_hz)]), times)[0]


def rms(a, b) -> float:
    return float(np.sqrt(np.mean((np.real(a) - np.real(b)) ** 2)))


def grid_us(start, stop, step):
    return time_grid(start, stop, step)


def divergence_warnings(fn):
    """Run fn, returning (result, number of DivergenceWarnings)."""
    from quadfloquet.floquet import DivergenceWarning

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = fn()
    return out, sum(issubclass(w.category, DivergenceWarning) for w in caught)


@pytest.fixture(scope="session")
def grid_set():
    return pw.generate_crystal_set("grid", 28656)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
