import numpy as np
import pytest

from dmetkit import _kernels
from dmetkit.models import hubbard_chain

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def chain8():
    """Open chain, L=8, N=4, fragments of two sites, bond interaction U=1."""
    return hubbard_chain(8, 4, t=1.0, U=1.0)


@pytest.fixture(params=["numba", "numpy"])
def kernel_path(request, monkeypatch):
    if request.param == "numba" and not _kernels.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    monkeypatch.setattr(_kernels, "USE_NUMBA", request.param == "numba")
    return request.param


def random_projector(rng, L, N):
    q, _ = np.linalg.qr(rng.normal(size=(L, L)))
    return q[:, :N] @ q[:, :N].T
