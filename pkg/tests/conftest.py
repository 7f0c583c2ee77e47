import numpy as np
import pytest

from hbf_lab.channel import SystemConfig, random_channel


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(rng, n):
    X = crandn(rng, n, n)
    return X + X.conj().T


def random_pd(rng, n):
    L = crandn(rng, n, n)
    return L @ L.conj().T + 1e-3 * np.eye(n)


def random_unitary_columns(rng, m, n):
    Q, _ = np.linalg.qr(crandn(rng, m, n))
    return Q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    return SystemConfig(n_tx=16, n_rx=4, n_tx_rf=4, n_rx_rf=2, n_users=2, n_streams=2,
                        power=1.0, noise_var=0.5, n_paths=6)


@pytest.fixture
def small_channel(small_cfg):
    return random_channel(small_cfg, np.random.default_rng(7))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
