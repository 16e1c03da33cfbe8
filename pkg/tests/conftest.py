import pytest

from commstab.equilibrium import EquilibriumSpec
from commstab.model import ModelParams


def base_params(**overrides):
    values = dict(f0=1.0, a=1.0, g0=1.0, c=0.5, ep=1.0, eq=1.0, big_l=2.0, n_comm=2)
    values.update(overrides)
    return ModelParams(**values)


@pytest.fixture
def params():
    return base_params()


@pytest.fixture
def gapped_spec():
    # L_C = 1, l_d = l_star = 0.5
    return EquilibriumSpec.build(base_params())


@pytest.fixture
def full_spec():
    # L_C = 0.4 below the threshold 0.5
    return EquilibriumSpec.build(base_params(big_l=0.8))


@pytest.fixture
def threshold_spec():
    return EquilibriumSpec.build(base_params(big_l=1.0))
