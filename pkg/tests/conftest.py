import numpy as np
import pytest

from robust_mslca import BlockStructure, compute_constants, tune_loss

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def spec4():
    return tune_loss(4, 0.5)


@pytest.fixture(scope="session")
def spec6():
    return tune_loss(6, 0.5)


@pytest.fixture(scope="session")
def constants6(spec6):
    return compute_constants(spec6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(rng, q, cond=10.0):
    """Random SPD matrix with eigenvalues spread over ``[1, cond]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((q, q)))
    return (Q * np.geomspace(1.0, cond, q)) @ Q.T


def unit_block_model(rng, blocks, scale=0.9):
    """SPD matrix whose diagonal blocks are identities."""
    A = random_spd(rng, blocks.q, cond=5.0)
    lab = blocks.labels()
    A = np.where(lab[:, None] == lab[None, :], np.eye(blocks.q), A)
    # shrink the off-diagonal part until positive definite
    while np.linalg.eigvalsh(A)[0] <= 0.05:
        A = np.where(lab[:, None] == lab[None, :], A, scale * A)
    return A


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
