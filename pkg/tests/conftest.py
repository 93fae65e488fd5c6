import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from hyperpoly.fnspace import TaylorPoly

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def small_seed(rng: np.random.Generator, degree: int = 8, spread: float = 0.05) -> TaylorPoly:
    """``1 + sum a_k z^k`` with ``|a_k| <= spread 8^-k``: ``0.5 < |f(j)| < 2`` for ``j <= 6``."""
    k = np.arange(1, degree + 1)
    mag = spread * rng.uniform(0, 1, degree) * 8.0 ** (-k)
    a = mag * np.exp(2j * np.pi * rng.uniform(0, 1, degree))
    return TaylorPoly([1.0 + 0j, *a])


def random_poly(rng: np.random.Generator, degree: int, scale: float = 1.0) -> TaylorPoly:
    c = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
    return TaylorPoly(scale * c)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)
coeff_lists = st.lists(cplx, min_size=1, max_size=9)
