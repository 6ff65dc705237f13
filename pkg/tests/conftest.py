import numpy as np
import pytest

from oscaudit import app
from oscaudit.linalg3 import SymMat3, make_rng

SQRT3 = np.sqrt(3.0)
# Rows all sum to 10, eigenvalues 4 - sqrt(3), 4 + sqrt(3), 10
EXAMPLE = [[7.0, 1.0, 2.0], [1.0, 6.0, 3.0], [2.0, 3.0, 5.0]]
EXAMPLE_EIGENVALUES = [4.0 - SQRT3, 4.0 + SQRT3, 10.0]


@pytest.fixture(autouse=True)
def fresh_app(monkeypatch):
    monkeypatch.setattr(app, 'config', {})
    monkeypatch.setattr(app, 'args', None)


@pytest.fixture
def rng():
    return make_rng(20240917)


@pytest.fixture
def example():
    return SymMat3.from_matrix(np.array(EXAMPLE))


@pytest.fixture
def example_eigenvalues():
    return np.array(EXAMPLE_EIGENVALUES)
