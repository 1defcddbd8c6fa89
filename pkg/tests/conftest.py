import numpy as np
import pytest

from memmeter.engine.machine import MachineSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cnn_spec():
    return MachineSpec(kind="small_cnn", in_channels=3, height=12, width=12)


@pytest.fixture
def mlp_spec():
    return MachineSpec(kind="mlp", in_channels=3, height=6, width=6, hidden=(8,))
