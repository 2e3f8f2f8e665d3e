import numpy as np
import pytest

from uccert import build_psi, ik_model


@pytest.fixture(scope="session")
def ik2():
    return ik_model(2)


@pytest.fixture(scope="session")
def ik3():
    return ik_model(3)


@pytest.fixture(scope="session")
def ik2_fields(ik2):
    psi0, psi1 = build_psi(ik2.geometry)
    return ik2.geometry.Q, psi0, psi1


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
