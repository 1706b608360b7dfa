import numpy as np
import pytest

from affsim.rootsys import build_root_system


@pytest.fixture(scope="session")
def rs1():
    return build_root_system("A", 1)


@pytest.fixture(scope="session")
def rs2():
    return build_root_system("A", 2)


@pytest.fixture()
def rng():
    return np.random.default_rng(987654321)
