import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dmpfem import kernels

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run the test once per available kernel backend."""
    previous = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_simplices(rng, n, d, min_volume=0.05):
    """``n`` random d-simplices with bounded shape (volume of unit-box points)."""
    out = []
    fact = 2.0 if d == 2 else 6.0
    while len(out) < n:
        x = rng.uniform(-1.0, 1.0, size=(d + 1, d))
        if abs(np.linalg.det(x[1:] - x[0])) / fact > min_volume:
            out.append(x)
    return np.array(out)


def random_spd(rng, n, d, cond=1e3):
    """``n`` random SPD matrices with condition numbers up to ``cond``."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, d, d)))
    lam = np.exp(rng.uniform(0.0, np.log(cond), size=(n, d)))
    return np.einsum("nij,nj,nkj->nik", Q, lam, Q)


# acceptance results, filled by tests/test_acceptance.py and echoed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
