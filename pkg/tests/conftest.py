import numpy as np
import pytest

from betasde import GraphPotentialParams


@pytest.fixture
def c1():
    return GraphPotentialParams(np.zeros((1, 1)), [1.0], [1.0])


@pytest.fixture
def c2():
    return GraphPotentialParams(np.array([[0.0, 1.0], [1.0, 0.0]]), [1.0, 1.0], [0.0, 1.0])


@pytest.fixture
def triangle():
    W = np.array([[0.2, 1.0, 0.5], [1.0, 0.0, 2.0], [0.5, 2.0, 0.0]])
    return GraphPotentialParams(W, [0.8, 1.2, 1.0], [0.5, 0.0, 1.5])
