from __future__ import annotations

import numpy as np
import pytest

from distortion_lab import hyperbolic as hy
from distortion_lab.ifs_core import random_pair, ternary_pair


@pytest.fixture(scope="session")
def ternary():
    return ternary_pair()


@pytest.fixture(scope="session")
def random_pairs():
    rng = np.random.default_rng(2024)
    return [random_pair(rng) for _ in range(5)]


@pytest.fixture(scope="session")
def baker():
    return hy.get_system("skinny_baker")


@pytest.fixture(scope="session")
def baker_oracle(baker):
    return hy.orbit_oracle(baker, 1000, 100_000, 0)


@pytest.fixture(scope="session")
def solenoid():
    return hy.get_system("solenoid")


@pytest.fixture(scope="session")
def solenoid_oracle(solenoid):
    return hy.orbit_oracle(solenoid, 1000, 100_000, 0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
