import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repro", derandomize=True, deadline=None)
settings.register_profile("stress", max_examples=1000, deadline=None)
settings.load_profile("repro")

from carlemanlab.quadratic_ode import QuadraticSystem


def random_system(rng, n, density=0.5, scale=1.0, dissipative=True):
    """Random quadratic system; with ``dissipative`` F1 is shifted to be stable."""
    f2 = rng.normal(size=(n, n * n)) * (rng.random((n, n * n)) < density) * scale
    f1 = rng.normal(size=(n, n)) * scale
    if dissipative:
        shift = np.max(np.linalg.eigvals(f1).real) + 1.0
        f1 = f1 - shift * np.eye(n)
    f0 = rng.normal(size=n) * scale
    return QuadraticSystem.from_dense(f2, f1, f0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("CARLEMANLAB_OUT", str(tmp_path / "out"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
