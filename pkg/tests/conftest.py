from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pibase.fixtures import build_fixture, train_replay_cascade


@pytest.fixture(scope="session")
def replay_cascade():
    """Bootstrap-mined toy cascade shared by detection/pipeline/e2e tests."""
    return train_replay_cascade(seed=7)


@pytest.fixture(scope="session")
def e2e_fixture(tmp_path_factory, replay_cascade):
    dest = tmp_path_factory.mktemp("replay-fixture")
    manifest = build_fixture(dest, seed=7, burst_count=2, cascade=replay_cascade)
    return dest, manifest


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
