"""Shared fixtures for the waring test-suite."""

import numpy as np
import pytest

from waring.distribution import GwdParams
from waring.geometry import QuadratGrid, Window

ALPHA = 0.001  # Significance level for goodness-of-fit tests


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240517)


@pytest.fixture
def unit_params() -> GwdParams:
    """(a, k; ρ) = (1, 1; 2): π₀ = 2/3, π₁ = 1/6."""
    return GwdParams(a=1.0, k=1.0, rho=2.0)


@pytest.fixture
def unit_square() -> Window:
    return Window(lower=(0.0, 0.0), upper=(1.0, 1.0))


@pytest.fixture
def two_cells() -> QuadratGrid:
    """Two unit-volume cells on [0, 2]."""
    return QuadratGrid(Window(lower=(0.0,), upper=(2.0,)), (2,))


def within_se(estimate: float, target: float, se: float, width: float = 3.0) -> bool:
    return abs(estimate - target) <= width * se
