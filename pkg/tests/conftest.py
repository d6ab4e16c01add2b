import numpy as np
import pytest

from logdiv.config import get_settings
from logdiv.potentials import AlphaParam, make_builtin_potential
from logdiv.schemas import BuiltinName, Concavity


@pytest.fixture(autouse=True)
def _fresh_settings():
    # LOGDIV_* env changes made by a test must not leak into the cached settings
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def simplex_phi():
    """-log(1 + sum (1 + xi_i)^-1), the F(+1) simplex potential in d=2."""
    return make_builtin_potential(BuiltinName.SIMPLEX_F_ALPHA, 2, AlphaParam(1.0))


@pytest.fixture
def simplex_minus_phi():
    return make_builtin_potential(BuiltinName.SIMPLEX_F_MINUS_ALPHA, 2,
                                  AlphaParam(0.5, Concavity.CONVEX))


@pytest.fixture
def dirichlet_phi():
    return make_builtin_potential(BuiltinName.DIRICHLET_LOG, 2, AlphaParam(0.5))


@pytest.fixture
def barrier_phi():
    return make_builtin_potential(BuiltinName.LOG_BARRIER, 2, AlphaParam(0.5, Concavity.CONVEX))


@pytest.fixture
def quadratic_phi():
    """-|xi|^2/2 in the Bregman limit, concave class."""
    return make_builtin_potential(BuiltinName.QUADRATIC, 2, AlphaParam(0.0))
