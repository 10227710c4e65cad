import numpy as np
import pytest

from urllc_ppp.sirdist import NetworkParams

REFERENCE_DENSITIES = (0.5e-5, 1e-5, 2e-5)


@pytest.fixture
def ref_net():
    return NetworkParams(density=1e-5, link_distance=5.0, path_loss_beta=4.0, inv_power=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
