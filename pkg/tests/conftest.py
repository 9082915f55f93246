from fractions import Fraction as F

import pytest

from condgw.core import ExplicitOffspring, LevelRanges, PoissonThinning


@pytest.fixture
def binary():
    return ExplicitOffspring(1, {1: {(0,): F(1, 2), (2,): F(1, 2)}})


@pytest.fixture
def zero_one_two():
    return ExplicitOffspring(1, {1: {(0,): F(1, 4), (1,): F(1, 4), (2,): F(1, 2)}})


@pytest.fixture
def two_type():
    return ExplicitOffspring(
        2,
        {
            1: {(0, 0): F(1, 2), (1, 0): F(1, 4), (1, 1): F(1, 4)},
            2: {(0, 0): F(1, 3), (0, 2): F(1, 3), (1, 1): F(1, 3)},
        },
    )


@pytest.fixture
def two_type_leveled(two_type):
    top = ExplicitOffspring(
        2,
        {
            1: {(2, 0): F(1, 2), (0, 1): F(1, 2)},
            2: {(1, 0): F(1, 5), (0, 2): F(4, 5)},
        },
    )
    return LevelRanges(two_type, [(0, 1, top)])


@pytest.fixture
def mutation_model():
    return PoissonThinning([1.0, 1.5], [1.0, 1e-9])
