import numpy as np
import pytest

from reldiff import minkowski as mk
from reldiff.spectral import BathParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def bath():
    return BathParams(beta=1.0, eps=3.0, pi_eps=1.0)


@pytest.fixture
def moving_bath():
    return BathParams(beta=0.7, eps=2.5, pi_eps=0.4, w=mk.unit_timelike(0.8, (0.3, -0.5, 1.0)))


def random_momenta(rng, n, max_rapidity=3.0):
    """On-shell momenta with random masses and directions, rapidity up to ``max_rapidity``."""
    m = rng.uniform(0.2, 4.0, n)
    y = rng.uniform(0.0, max_rapidity, n)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return mk.on_shell(m[:, None] * np.sinh(y)[:, None] * d, m)


def random_bath(rng, **kw):
    eps = rng.uniform(0.1, 5.0)
    pi = rng.uniform(0.0, eps / 3.0)
    w = mk.unit_timelike(rng.uniform(0.0, 2.0), rng.normal(size=3))
    return BathParams(beta=rng.uniform(0.2, 5.0), eps=eps, pi_eps=pi, w=w, **kw)


ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance")
    for key in sorted(ACCEPTANCE_LINES, key=int):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
