import numpy as np
import pytest

from mtsense import SystemConfig, default_plan, reference_scene


@pytest.fixture(scope="session")
def cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def small_cfg():
    """Tiny dimensions so brute-force scalar oracles stay readable and fast."""
    return SystemConfig(m_tx=4, m_rx=3, n_sub=4, n_sym=5, noise_var=0.5)


@pytest.fixture(scope="session")
def plan(cfg):
    return default_plan(cfg)


@pytest.fixture(scope="session")
def small_plan(small_cfg):
    return default_plan(small_cfg, n_beams=7, span_deg=50.0)


@pytest.fixture(scope="session")
def ref_scene(cfg):
    return reference_scene(cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
