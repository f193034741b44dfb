import pytest

from ruswitch import config, receiver as rx, waveform as wf
from ruswitch.channel import median_channel_gains
from ruswitch.rng import stream


@pytest.fixture(scope="session")
def cfg():
    return config.default_scenario()


@pytest.fixture(scope="session")
def bmin_table(cfg):
    """Minimum backoff per waveform at the -28 dB sweep requirement.

    Computed once; reused by the crossover, sweep, and optimizer criteria.
    """
    return {kind: rx.min_backoff(cfg, kind, -28.0, trials=150, seed=5)
            for kind in wf.WAVEFORMS}


@pytest.fixture(scope="session")
def gains_median(cfg):
    return median_channel_gains(cfg.sweep.channel_draws, stream(cfg.seed, "chanstats"))
