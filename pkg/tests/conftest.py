import os
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from hodgefrob.frobmod import FrobeniusModule, Potential
from hodgefrob.qseries import Series

settings.register_profile(
    "exact", deadline=None, max_examples=int(os.environ.get("HODGEFROB_EXAMPLES", "25")),
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("exact")

D = 6
ANTIDIAG4 = [[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]]


def quintic_like(y: int = 5) -> FrobeniusModule:
    """dims (1,1,1,1) with T1*T0 = T1, T1*T1 = y T2, T1*T2 = T3."""
    A = [[0] * 4 for _ in range(4)]
    A[1][0], A[2][1], A[3][2] = 1, y, 1
    return FrobeniusModule(3, (1, 1, 1, 1), ANTIDIAG4, [A])


@pytest.fixture
def quintic():
    return quintic_like(5)


@pytest.fixture
def quintic_potential():
    return Potential(3, 1, D, Series.q(0, 1, D))


def F(x) -> Fraction:
    return Fraction(x)
