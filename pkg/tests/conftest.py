import numpy as np
import pytest

from bgsupport.signal_model import Instance, ModelParams, SparseSignal


def make_instance(A, x, e, params):
    """Instance assembled from explicit parts (bypasses the seeded generator)."""
    A = np.asarray(A, float)
    x = np.asarray(x, float)
    e = np.asarray(e, float)
    support = tuple(int(i) for i in np.flatnonzero(x))
    return Instance(params, A, SparseSignal(support, x), e, A @ x + e)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def desk_params():
    return ModelParams.from_nominal_snr(16, 12, 0.125, 20.0)


@pytest.fixture
def reference_params():
    return ModelParams.from_nominal_snr(4096, 256, 0.01, 20.0)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one verdict line per acceptance criterion for the summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
