import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_symmetric(rng, size, low=-5.0, high=5.0):
    """Symmetric matrix with spectrum uniform in [low, high]."""
    q, _ = np.linalg.qr(rng.standard_normal((size, size)))
    return q @ np.diag(rng.uniform(low, high, size)) @ q.T


def bordered(block):
    """Embed a (2n-1) block in a (2n+1) matrix with zero first/last rows and columns."""
    m = block.shape[0] + 2
    r = np.zeros((m, m))
    r[1:-1, 1:-1] = block
    return r


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
