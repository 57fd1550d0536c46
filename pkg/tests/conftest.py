import math

import pytest

from isodimer import verify


@pytest.fixture(scope="session")
def z2_bundle():
    return verify.bundle_for("square:theta=0.7853981633974483", 6.0)


@pytest.fixture(scope="session")
def quasi_bundle():
    return verify.bundle_for("quasiperiodic:size=5,seed=2", 5.0)


@pytest.fixture(scope="session")
def theta():
    return math.pi / 4
