import numpy as np
import pytest

from minpower.asympt import synthetic_users
from minpower.model import SystemConfig, draw_channel, make_users, sample_positions

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(name, ok, detail)``."""

    def record(name, ok, detail=""):
        _CRITERIA.append((name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cfg():
    return SystemConfig()


def random_instance(rng, N, K, rate=2.0, cfg=None):
    cfg = cfg or SystemConfig(N=N, K=K)
    pos = sample_positions(rng, K, cfg)
    rates = rate if np.isscalar(rate) else rng.uniform(*rate, size=K)
    return draw_channel(rng, make_users(pos, rates, cfg), N)


def unit_instance(rng, N, K, gamma=1.0, l=1.0):
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,))
    return draw_channel(rng, synthetic_users(gamma, l), N)
