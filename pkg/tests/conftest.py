import cmath
import math

import numpy as np
import pytest


def naive_dft(v):
    """O(N^2) complex DFT, written out term by term."""
    n = len(v)
    return np.array([sum(v[m] * cmath.exp(-2j * math.pi * k * m / n) for m in range(n))
                     for k in range(n)])


def circular_acf(frame):
    """r[q] = sum_m f[m] f[(m + q) mod N], by explicit double loop."""
    n = len(frame)
    return np.array([sum(frame[m] * frame[(m + q) % n] for m in range(n)) for q in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
