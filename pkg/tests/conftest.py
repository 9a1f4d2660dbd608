import numpy as np
import pytest

from effwave.periodic import sample_periodic

M = 64


def const(v, M=M):
    return sample_periodic({"named": "constant", "params": {"value": v}}, M)


def cosine(mean, amp, M=M):
    return sample_periodic({"named": "cosine", "params": {"mean": mean, "amplitude": amp}}, M)


@pytest.fixture
def one():
    return const(1.0)


@pytest.fixture
def zero():
    return const(0.0)


@pytest.fixture
def mathieu_c():
    return cosine(0.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the session
CRITERIA: dict[str, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    CRITERIA[f"{number:02d}"] = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[key])
