import math

import hypothesis
import numpy as np
import pytest

from hostcap.cases import ninebus, two_bus, two_bus_pu

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def nine():
    return ninebus()


@pytest.fixture(scope="session")
def two():
    return two_bus()


@pytest.fixture(scope="session")
def two_unlimited():
    return two_bus(current_limit=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pu2():
    """Per-unit two-bus case with r = x = 0.01."""
    return two_bus_pu(0.01, 0.01)


def two_bus_l(r, x, v0, p, q):
    """Closed-form squared current of a two-bus feeder.

    ``p, q`` are the receiver's net injections.  The physical branch is the
    smaller root of ``z2 l^2 - (2(rp + xq) + v0) l + p^2 + q^2 = 0``.
    """
    z2 = r * r + x * x
    b = 2 * (r * p + x * q) + v0
    disc = b * b - 4 * z2 * (p * p + q * q)
    if disc < 0:
        return math.nan
    # cancellation-free form of (b - sqrt(disc)) / (2 z2)
    return 2 * (p * p + q * q) / (b + math.sqrt(disc))


ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the line is echoed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
