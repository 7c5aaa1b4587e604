import numpy as np
import pytest

from delayjsr.model import DelaySet, Gain, Plant

PAPER_A11 = (1.1, (-0.6085, 0.0941))
PAPER_A15 = (1.5, (-0.9047, 0.1430))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def scalar_case(a, k, delays=(0, 1)):
    return Plant.scalar(a), DelaySet(delays), Gain.from_flat(k)


ACCEPTANCE_LINES = []


def record(label, ok, detail=""):
    line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
