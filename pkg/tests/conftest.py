import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption("--run-long", action="store_true", default=False, help="run opt-in long sweeps")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-long"):
        return
    skip = pytest.mark.skip(reason="long sweep; enable with --run-long")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)


def random_unitary(dim, rng):
    Z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_traceless_hermitian(dim, rng, scale=1.0):
    Z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    H = scale * (Z + Z.conj().T) / 2
    return H - np.trace(H) / dim * np.eye(dim)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def qft3_trace():
    """Full QFT(3) sweep to q = 63 with default settings, shared across modules."""
    from geocomplexity.continuation import ContinuationConfig, run_continuation
    from geocomplexity.targets import qft_matrix

    return run_continuation(qft_matrix(3), ContinuationConfig(q_max=63))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
