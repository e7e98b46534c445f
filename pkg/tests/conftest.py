import numpy as np
import pytest

from papr_lab.ofdm import ConstellationSpec, OfdmConfig
from papr_lab.pc import WindowParams, synthesize_kernel


@pytest.fixture(scope="session")
def cfg():
    return OfdmConfig()


@pytest.fixture(scope="session")
def qpsk_spec(cfg):
    return ConstellationSpec.for_config(cfg)


@pytest.fixture(scope="session")
def default_kernel(cfg):
    return synthesize_kernel(cfg, WindowParams(t1=0.125, t2=0.25))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
