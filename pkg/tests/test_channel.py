import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ruswitch import channel as chan
from ruswitch.rng import stream

FS = 30.72e6


def test_profile_table():
    delays, powers = chan.tdlc_profile()
    assert delays.size == powers.size == 24
    assert delays.min() == 0.0
    assert powers.max() == 0.0


def test_mean_tap_power_normalized():
    # Monte-Carlo against the unit-power normalization
    total = 0.0
    n = 10_000
    rng = np.random.default_rng(0)
    for _ in range(n):
        r = chan.draw_tdlc(300.0, FS, 2048, rng)
        total += np.sum(np.abs(r.taps) ** 2)
    assert total / n == pytest.approx(1.0, rel=0.02)


def test_zero_delay_spread_is_flat():
    r = chan.draw_tdlc(0.0, FS, 256, np.random.default_rng(1))
    assert r.taps.size == 1
    mags = np.abs(r.freq_response)
    assert np.max(np.abs(mags - mags[0])) < 1e-6 * mags[0]


def test_same_stream_same_realization():
    a = chan.draw_tdlc(300.0, FS, 512, stream(42, 0, "channel"))
    b = chan.draw_tdlc(300.0, FS, 512, stream(42, 0, "channel"))
    np.testing.assert_array_equal(a.taps, b.taps)
    np.testing.assert_array_equal(a.freq_response, b.freq_response)


def test_excessive_delay_spread_rejected():
    with pytest.raises(ValueError):
        chan.draw_tdlc(1e5, FS, 64, np.random.default_rng(0))
    with pytest.raises(ValueError):
        chan.draw_tdlc(-1.0, FS, 64, np.random.default_rng(0))


def test_impulse_channel_is_identity():
    x = np.exp(1j * np.linspace(0, 5, 128))
    r = chan.ChannelRealization(taps=np.array([1.0 + 0j]),
                                freq_response=np.fft.fft([1.0 + 0j], 128),
                                noise_variance=0.0)
    np.testing.assert_allclose(chan.apply_channel(x, r, np.random.default_rng(0)), x,
                               atol=1e-12)


def test_tone_is_channel_eigenvector():
    n = 64
    r = chan.draw_tdlc(300.0, n * 15e3, n, np.random.default_rng(2))
    for k in (0, 5, 33):
        x = np.exp(2j * np.pi * k * np.arange(n) / n) / math.sqrt(n)
        y = chan.apply_channel(x, r, np.random.default_rng(0))
        np.testing.assert_allclose(y, r.freq_response[k] * x, atol=1e-10)


def test_matrix_form_oracle():
    # dense circulant matrix built column by column, compared to the
    # transform-domain convolution path
    n = 32
    rng = np.random.default_rng(3)
    r = chan.draw_tdlc(300.0, FS, 2048, rng)
    r = chan.ChannelRealization(taps=r.taps[: n // 2],
                                freq_response=np.fft.fft(r.taps[: n // 2], n),
                                noise_variance=0.0)
    col = np.zeros(n, dtype=complex)
    col[:r.taps.size] = r.taps
    h_mat = np.stack([np.roll(col, k) for k in range(n)], axis=1)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    direct = h_mat @ x
    via_fft = chan.apply_channel(x, r, rng)
    assert np.max(np.abs(direct - via_fft)) < 1e-10


def test_circulant_diagonalization():
    n = 16
    r = chan.draw_tdlc(300.0, n * 15e3, n, np.random.default_rng(4))
    col = np.zeros(n, dtype=complex)
    col[:r.taps.size] = r.taps
    h_mat = np.stack([np.roll(col, k) for k in range(n)], axis=1)
    f = np.fft.fft(np.eye(n)) / math.sqrt(n)
    diag = f @ h_mat @ f.conj().T
    off = diag - np.diag(np.diag(diag))
    assert np.max(np.abs(off)) < 1e-10
    np.testing.assert_allclose(np.diag(diag), r.freq_response, atol=1e-10)


def test_length_mismatch_rejected():
    r = chan.draw_tdlc(300.0, 64 * 15e3, 64, np.random.default_rng(5))
    with pytest.raises(ValueError):
        chan.apply_channel(np.zeros(32, dtype=complex), r, np.random.default_rng(0))


def test_noise_variance_calibrated():
    sigma2 = 0.37
    r = chan.ChannelRealization(taps=np.array([1.0 + 0j]),
                                freq_response=np.fft.fft([1.0 + 0j], 100_000),
                                noise_variance=sigma2)
    y = chan.apply_channel(np.zeros(100_000, dtype=complex), r,
                           np.random.default_rng(6))
    assert np.mean(np.abs(y) ** 2) == pytest.approx(sigma2, rel=0.01)


def test_gains_identity():
    g = chan.channel_gains(np.eye(2))
    assert (g.lam0, g.lam1, g.lam_eff) == (1.0, 1.0, 1.0)


def test_gains_diagonal_case():
    g = chan.channel_gains(np.diag([1.0, 2.0]))
    assert g.lam0 == pytest.approx(4.0, abs=1e-12)
    assert g.lam1 == pytest.approx(1.0, abs=1e-12)
    assert g.lam_eff == pytest.approx(4.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_gains_trace_identity_and_bound(seed):
    h = chan.draw_flat_mimo(2, 2, np.random.default_rng(seed))
    g = chan.channel_gains(h)
    assert g.lam0 + g.lam1 == pytest.approx(np.sum(np.abs(h) ** 2), rel=1e-10)
    assert g.lam_eff <= g.lam0 + 1e-12


def test_gains_reject_nonfinite():
    with pytest.raises(ValueError):
        chan.channel_gains(np.array([[np.nan, 0], [0, 1]], dtype=complex))


def test_median_gains_deterministic():
    a = chan.median_channel_gains(500, stream(7, "chanstats"))
    b = chan.median_channel_gains(500, stream(7, "chanstats"))
    assert a == b
    assert a.lam0 >= a.lam1 >= 0
    assert a.lam_eff <= a.lam0
