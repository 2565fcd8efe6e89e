import numpy as np
import pytest
from hypothesis import settings, strategies as st

from netcalc import Curve, DeltaNode, PathSpec, RateBurst
from netcalc.minplus import INF

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

C = 100e6
DET_THROUGH = RateBurst(1.5e6, 300e3)
DET_CROSS = RateBurst(88.5e6, 300e3)


def det90(H: int, delta: float) -> PathSpec:
    return PathSpec.homogeneous(H, C, delta, DET_CROSS, DET_THROUGH)


def random_curve(rng: np.random.Generator, max_pieces: int = 4, jumps: bool = True,
                 tail_slope=None) -> Curve:
    """Nondecreasing piecewise-linear curve on a unit time scale."""
    n = int(rng.integers(1, max_pieces + 1))
    times = np.concatenate(([0.0], np.sort(rng.uniform(0.05, 3.0, n - 1))))
    slopes = rng.uniform(0.0, 5.0, n)
    if tail_slope is not None:
        slopes[-1] = tail_slope
    values = [float(rng.uniform(0, 2)) if jumps and rng.random() < 0.5 else 0.0]
    for i in range(1, n):
        left = values[-1] + slopes[i - 1] * (times[i] - times[i - 1])
        values.append(left + (float(rng.uniform(0, 1.5)) if jumps and rng.random() < 0.4 else 0.0))
    return Curve(tuple(float(t) for t in times), tuple(values), tuple(float(s) for s in slopes))


@st.composite
def curves(draw, max_pieces: int = 4, jumps: bool = True):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_curve(np.random.default_rng(seed), max_pieces, jumps)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# PASS/FAIL lines written by the acceptance tests
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
