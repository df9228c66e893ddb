"""Shared fixtures.

``exact_cfg`` places the carrier, message tone and symbol rate on exact DFT
bins of both the full record (N = 4160) and the edge-trimmed window
(L = 4096), so closed-form feature values hold to rounding.
"""

import numpy as np
import pytest

from amc_config import SynthConfig
from amc_synthesis import SchemeLabel, Waveform, synthesize


@pytest.fixture
def exact_cfg() -> SynthConfig:
    return SynthConfig(
        sample_rate=102_400.0,
        carrier=25_600.0,
        message_freq=1_600.0,
        num_samples=4160,
        am_depth=0.5,
        fm_index=5.0,
        symbol_rate=1_024.0,
        fsk_deviation=2_048.0,
        rng_seed=7,
    )


@pytest.fixture
def carrier(exact_cfg) -> Waveform:
    """Pure carrier cos(2 pi fc t)."""
    return synthesize(SchemeLabel.AM, exact_cfg.with_updates(am_depth=0.0))


@pytest.fixture
def am_wave(exact_cfg) -> Waveform:
    return synthesize(SchemeLabel.AM, exact_cfg)


@pytest.fixture
def fm_wave(exact_cfg) -> Waveform:
    return synthesize(SchemeLabel.FM, exact_cfg)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
