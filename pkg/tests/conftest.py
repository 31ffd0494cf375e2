"""
Pytest fixtures for hidex tests.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add hidex to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from hidex.engine import TaskEngine
from hidex.ldpc import build_code
from hidex.models import ExperimentConfig

# Short frames keep message passing cheap: 8 + 6 + 16 = 30 symbols.
TINY_FRAME = {"preamble_len": 8, "header_len": 6, "payload_len": 12, "pilot_period": 4}
SMALL_PROFILE = {2: 0.5, 3: 0.5}


@pytest.fixture
def engine():
    """Create a fresh TaskEngine for each test."""
    return TaskEngine()


@pytest.fixture
def rng():
    """Seeded generator so statistical checks are repeatable."""
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_code():
    """A (60, 30) irregular code, built once per session."""
    return build_code(n=60, k=30, profile=SMALL_PROFILE, seed=3)


@pytest.fixture
def tiny_config():
    """Factory for fast ExperimentConfigs on 30-symbol frames, run at exactly `trials` unless max_trials is given."""
    def make(**updates) -> ExperimentConfig:
        base = {
            "snr_grid_db": [15.0],
            "trials": 2,
            "seed": 11,
            "k_max": 4,
            "frame": TINY_FRAME,
        }
        base.update(updates)
        base.setdefault("max_trials", base["trials"])
        return ExperimentConfig.model_validate(base)
    return make


@pytest.fixture
def coded_config():
    """Factory for coded ExperimentConfigs using the (60, 30) code."""
    def make(**updates) -> ExperimentConfig:
        base = {
            "scenario": "coded",
            "snr_grid_db": [20.0],
            "trials": 1,
            "seed": 2,
            "k_max": 4,
            "frame": {"preamble_len": 8, "header_len": 0, "payload_len": 60, "pilot_period": 4},
            "code": {"n": 60, "k": 30, "seed": 3, "profile": SMALL_PROFILE},
            "schedules": [{"i_det": 1, "i_dec": 4}, {"i_det": 2, "i_dec": 2}],
        }
        base.update(updates)
        base.setdefault("max_trials", base["trials"])
        return ExperimentConfig.model_validate(base)
    return make
