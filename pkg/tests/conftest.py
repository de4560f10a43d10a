"""Test configuration and fixtures."""

import numpy as np
import pytest

from fastbcda.core.config import get_settings
from fastbcda.solvers.problem import Instance, generate_instance

# Exact optimum of the identity instance below: soft threshold of b at tau
IDENTITY_B = np.array([3.0, -0.5, 1.5, -2.0])
IDENTITY_X_STAR = np.array([2.0, 0.0, 0.5, -1.0])


def make_random_instance(
    seed: int, m: int, n: int, tau_factor: float = 0.1
) -> Instance:
    """Gaussian instance with tau = tau_factor * ||A^T b||_inf."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    tau = tau_factor * float(np.abs(A.T @ b).max())
    return Instance(A=A, b=b, tau=tau)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Keep FASTBCDA_* variables of the host out of the tests."""
    for name in ("LOG_LEVEL", "LOG_FORMAT", "LOG_FILE", "BENCH_WORKERS"):
        monkeypatch.delenv(f"FASTBCDA_{name}", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def identity_instance() -> Instance:
    """A = I_4, b = (3, -0.5, 1.5, -2), tau = 1."""
    return Instance(A=np.eye(4), b=IDENTITY_B, tau=1.0)


@pytest.fixture
def identity_x_star() -> np.ndarray:
    return IDENTITY_X_STAR.copy()


@pytest.fixture
def random_instance() -> Instance:
    """Gaussian 20 x 40 instance."""
    return make_random_instance(seed=7, m=20, n=40)


@pytest.fixture
def tiny_p1() -> Instance:
    """P1 instance with n=64, m=16, rho=0.2."""
    return generate_instance("P1", 64, 16, 0.2, seed=11)


@pytest.fixture
def small_p2() -> Instance:
    """P2 instance with n=64, m=16, rho=0.2."""
    return generate_instance("P2", 64, 16, 0.2, seed=5)
