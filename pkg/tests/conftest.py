import pytest

from freeconv.measures import atomic, bernoulli, semicircle
from freeconv.models.solution import SolverOptions


@pytest.fixture
def fair():
    return bernoulli(0.5)


@pytest.fixture
def sc():
    return semicircle(0.0, 1.0)


@pytest.fixture
def three_atoms():
    return atomic([(-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)], normalize=True)


@pytest.fixture
def opts():
    return SolverOptions()
