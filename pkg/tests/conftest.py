import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from ringerase.gaussian import QuadratureState  # noqa: E402

METER_VAR = 0.5 * math.exp(-2)
GAIN = math.exp(0.02)

ACCEPTANCE_LINES = []


def random_cov(nu, r, theta):
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    return nu * rot @ np.diag([math.exp(2 * r), math.exp(-2 * r)]) @ rot.T


@st.composite
def gaussian_states(draw, max_squeeze=1.5):
    nu = draw(st.floats(0.5, 4.0))
    r = draw(st.floats(-max_squeeze, max_squeeze))
    theta = draw(st.floats(0.0, math.pi))
    mx = draw(st.floats(-5, 5))
    mp = draw(st.floats(-5, 5))
    return QuadratureState(mx, mp, random_cov(nu, r, theta))


def random_state(rng, max_squeeze=1.5):
    cov = random_cov(rng.uniform(0.5, 4.0), rng.uniform(-max_squeeze, max_squeeze), rng.uniform(0, math.pi))
    return QuadratureState(rng.uniform(-5, 5), rng.uniform(-5, 5), cov)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
