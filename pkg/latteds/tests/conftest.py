import numpy as np
import pytest

from latteds.config import get_settings
from latteds.models import LatticeWindow


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def line():
    return LatticeWindow(dim=1, radius=16)


@pytest.fixture
def square():
    return LatticeWindow(dim=2, radius=6)


@pytest.fixture
def settings_env(monkeypatch, tmp_path):
    """Point LATTEDS_OUTPUT_DIR at a temporary directory and reload settings."""
    monkeypatch.setenv("LATTEDS_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("LATTEDS_THREADS", "2")
    get_settings.cache_clear()
    yield get_settings()
    get_settings.cache_clear()
