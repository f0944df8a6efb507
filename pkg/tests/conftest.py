import numpy as np
import pytest

from utmost.config import SolverConfig
from utmost.models import NoiseCovariance
from utmost.simulation.scenarios import CORRELATED_NOISE


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def correlated_noise():
    return NoiseCovariance(CORRELATED_NOISE)


@pytest.fixture
def short_config():
    return SolverConfig(max_outer=300)


@pytest.fixture
def config_file(tmp_path):
    """Writes YAML text to a file under tmp_path and returns its path."""
    def _write(text, name="run.yaml"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write
