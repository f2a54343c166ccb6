from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from laakso_lab.construction import params_from_dimension, params_from_ratio

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

Q_TERNARY = 1 + 0.6309297535714574  # log 2 / log 3


@pytest.fixture(scope="session")
def half():
    return params_from_ratio(Fraction(1, 2), 6)


@pytest.fixture(scope="session")
def third():
    return params_from_dimension(Q_TERNARY, 6)
