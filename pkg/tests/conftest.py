import numpy as np
import pytest

from vptomo import poisson, profiles
from vptomo.geometry import DiskDomain


@pytest.fixture(scope="session")
def domain():
    return DiskDomain(1.0)


@pytest.fixture(scope="session")
def zero_field():
    n = 64
    return poisson.FieldGrid(1.0, np.zeros((n, n, 2)), poisson.inside_mask(n, 1.0))


@pytest.fixture(scope="session")
def const_field_128():
    src = poisson.source_from_profile(profiles.constant(1.0), 128)
    return poisson.assemble_field(src)


@pytest.fixture(scope="session")
def const_field_256():
    src = poisson.source_from_profile(profiles.constant(1.0), 256)
    return poisson.assemble_field(src)


@pytest.fixture(scope="session")
def gauss_field_128():
    src = poisson.source_from_profile(profiles.gaussian(), 128)
    return poisson.assemble_field(src)
