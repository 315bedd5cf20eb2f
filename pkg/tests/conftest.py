import numpy as np
import pytest

from chemostokes.spectral import Grid, build_eigenbasis


@pytest.fixture(scope="session")
def small_basis():
    """16^2 grid, ~60 modes: fast enough for per-test solves."""
    return build_eigenbasis(Grid(16, 16), K=57)


@pytest.fixture(scope="session")
def desk_basis():
    """The desk-scale basis shared across the suite."""
    return build_eigenbasis(Grid(64, 64), K=200)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
