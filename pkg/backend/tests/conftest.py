import numpy as np
import pytest

from app.services.grid_service import DiscOperators
from tests.helpers import Sampled, disc_operators, sample


@pytest.fixture
def ops32() -> DiscOperators:
    return disc_operators(32, 64)


@pytest.fixture
def graph32() -> Sampled:
    return sample("holomorphic_graph")


@pytest.fixture
def plane32() -> Sampled:
    return sample("plane", codimension=2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Route every report into a temporary directory"""
    monkeypatch.setenv("FRAME_LAB_OUTPUT_DIR", str(tmp_path))
    return tmp_path
