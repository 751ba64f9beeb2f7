import numpy as np
import pytest

import snvtune as st


@pytest.fixture(scope="session")
def config():
    return st.load_default_config()


@pytest.fixture(scope="session")
def device(config):
    return config.device


@pytest.fixture(scope="session")
def axial(config):
    return config.emitter("axial_hinge")


@pytest.fixture(scope="session")
def transversal(config):
    return config.emitter("transversal_hinge")


@pytest.fixture(scope="session")
def bulk(config):
    return config.emitter("bulk_reference")


@pytest.fixture
def rng():
    return np.random.default_rng(20240117)
