import numpy as np
import pytest

import qemtp.pauli as pauli
from qemtp._backend import compiled, get_kernels

BACKENDS = ["python"] + (["cython"] if compiled is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available Pauli kernel implementation."""
    monkeypatch.setattr(pauli, "kernels", get_kernels(request.param))
    return request.param


def random_symmetric(dim, rng):
    u = rng.random((dim, dim))
    return np.triu(u) + np.triu(u, 1).T


def random_spd(dim, rng, kappa=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = np.geomspace(1.0, kappa, dim)
    g = (q * eig) @ q.T
    return (g + g.T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_REPORT = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for the acceptance summary, then assert."""
    lines = request.config.stash.setdefault(_REPORT, [])

    def check(number, ok, detail):
        lines.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_REPORT, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
