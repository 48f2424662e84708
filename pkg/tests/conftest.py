from __future__ import annotations

from pathlib import Path

import pytest

from config.settings import get_settings
from src.device_arena import ArenaConfig
from src.model_core import build_model, make_inputs

EXPERIMENTS = Path(__file__).resolve().parent.parent / "config" / "experiments"


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Keep logs and default artifacts inside the test's temporary directory."""
    monkeypatch.setenv("LOGS_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("SUPERPIPE_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("SWEEP_WORKERS", "2")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def experiments_dir() -> Path:
    return EXPERIMENTS


@pytest.fixture
def roomy_arena() -> ArenaConfig:
    return ArenaConfig(capacity_bytes=10_000_000)


@pytest.fixture
def small_model():
    return build_model(seed=5, n_layers=6, d=8)


@pytest.fixture
def small_inputs():
    return make_inputs(seed=5, n_items=3, batch_size=3, d=8)


@pytest.fixture
def hand_timeline_arena() -> ArenaConfig:
    # 24 B layers: 1 s per fetch, 2 s per eviction, 1 s per compute step (b=1, d=2)
    return ArenaConfig(
        capacity_bytes=1000,
        h2d_bandwidth=24.0,
        d2h_bandwidth=12.0,
        per_call_latency=0.0,
        device_compute_rate=8.0,
        host_compute_rate=0.16,
    )
