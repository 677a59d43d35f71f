import math

import numpy as np
import pytest

from oscint import systems
from oscint.core import SlowFastState


@pytest.fixture(scope="session")
def fpu():
    return systems.fpu_modified()


@pytest.fixture(scope="session")
def quartic3():
    return systems.quartic_multi(3)


@pytest.fixture(scope="session")
def quartic4():
    return systems.quartic_multi(4)


@pytest.fixture(scope="session")
def pendulum():
    return systems.elastic_pendulum()


@pytest.fixture(scope="session")
def free_scalar():
    """Scalar system with no slow coupling and a constant frequency.

    Every coupling term of the long-step scheme vanishes, so steps have
    closed forms (ballistic slow block, pure fast rotation).
    """
    zeros3 = lambda q1, q2: np.zeros(3)
    return systems.ScalarFreqSystem(
        s=3, f=3,
        Vcheck=lambda q1, q2: 0.0,
        grad1_Vcheck=zeros3,
        grad2_Vcheck=zeros3,
        Omega=lambda q1: math.sqrt(2.0),
        grad1_Omega=lambda q1: np.zeros(3),
        name="free")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_slowfast(rng, s, f, eps, fast_scale=None):
    """Admissible state with O(1) slow entries and O(eps) fast positions
    (the regime every scheme assumes)."""
    if fast_scale is None:
        fast_scale = eps
    return SlowFastState(
        q1=rng.uniform(-1.0, 1.0, s),
        q2=fast_scale * rng.uniform(-1.0, 1.0, f),
        p1=rng.uniform(-1.0, 1.0, s),
        p2=rng.uniform(-1.0, 1.0, f))
