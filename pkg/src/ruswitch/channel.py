"""Fading channel models.

Two views, used by different parts of the pipeline:

* the link-level path draws a frequency-selective tapped-delay-line
  realization (NLOS profile, Rayleigh taps) and applies it as a circular
  convolution plus AWGN, matching the circulant matrix model exactly;
* the link-budget path draws a frequency-flat 2x2 matrix with i.i.d.
  unit-variance complex Gaussian entries and reduces it to the eigenvalue
  statistics the closed forms consume.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass
from importlib import resources

import numpy as np


@functools.cache
def tdlc_profile() -> tuple[np.ndarray, np.ndarray]:
    """Normalized tap delays and per-tap powers in dB from the bundled table."""
    text = resources.files("ruswitch").joinpath("data/tdlc.csv").read_text("utf-8")
    rows = list(csv.DictReader(text.splitlines()))
    delays = np.array([float(r["delay_ns_normalized"]) for r in rows])
    powers = np.array([float(r["power_db"]) for r in rows])
    return delays, powers


@dataclass
class ChannelRealization:
    """One fading draw: tap impulse response and its tone-wise response."""

    taps: np.ndarray            # complex gains on the sample grid
    freq_response: np.ndarray   # length-N DFT of the zero-padded taps
    noise_variance: float       # per-sample AWGN variance, watts


def draw_tdlc(delay_spread_ns: float, sample_rate_hz: float, fft_size: int,
              rng: np.random.Generator, noise_variance: float = 0.0) -> ChannelRealization:
    """Draw one tapped-delay-line realization.

    Tap delays scale with ``delay_spread_ns`` and round to the nearest
    sample; taps falling on the same sample add.  Total mean tap power is
    normalized to one, so the tone response has unit mean square magnitude.
    """
    if delay_spread_ns < 0:
        raise ValueError("delay spread must be >= 0")
    delays_norm, powers_db = tdlc_profile()
    powers = 10.0 ** (powers_db / 10.0)
    powers = powers / powers.sum()
    sample_idx = np.rint(delays_norm * delay_spread_ns * 1e-9 * sample_rate_hz).astype(int)
    n_taps = int(sample_idx.max()) + 1
    if n_taps > fft_size:
        raise ValueError(
            f"delay spread of {n_taps} samples exceeds the grid of {fft_size}")
    gains = np.sqrt(powers / 2.0) * (rng.standard_normal(powers.size)
                                     + 1j * rng.standard_normal(powers.size))
    taps = np.zeros(n_taps, dtype=complex)
    np.add.at(taps, sample_idx, gains)
    freq = np.fft.fft(taps, fft_size)
    return ChannelRealization(taps=taps, freq_response=freq,
                              noise_variance=float(noise_variance))


def apply_channel(x: np.ndarray, realization: ChannelRealization,
                  rng: np.random.Generator) -> np.ndarray:
    """Circular convolution with the tap response plus complex AWGN."""
    x = np.asarray(x, dtype=complex)
    n = realization.freq_response.size
    if x.shape[-1] != n:
        raise ValueError(f"signal length {x.shape[-1]} does not match grid {n}")
    y = np.fft.ifft(np.fft.fft(x, axis=-1) * realization.freq_response, axis=-1)
    sigma2 = realization.noise_variance
    if sigma2 > 0:
        noise = np.sqrt(sigma2 / 2.0) * (rng.standard_normal(x.shape)
                                         + 1j * rng.standard_normal(x.shape))
        y = y + noise
    return y


def draw_flat_mimo(n_rx: int, n_tx: int, rng: np.random.Generator) -> np.ndarray:
    """Frequency-flat matrix with i.i.d. CN(0, 1) entries."""
    return (rng.standard_normal((n_rx, n_tx))
            + 1j * rng.standard_normal((n_rx, n_tx))) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelGains:
    """Eigen-quantities of one (or an aggregate of) flat channel draws."""

    lam0: float      # largest eigenvalue of H^H H
    lam1: float      # smallest eigenvalue
    lam_eff: float   # best single-antenna gain: max column norm squared

    def __post_init__(self):
        if not (self.lam0 >= self.lam1 >= 0 and self.lam_eff >= 0):
            raise ValueError("eigenvalues must be nonnegative and sorted")


def channel_gains(h_flat: np.ndarray) -> ChannelGains:
    """Eigenvalues of ``H^H H`` (descending) and the best column gain."""
    h = np.asarray(h_flat, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise ValueError("channel matrix has non-finite entries")
    ev = np.linalg.eigvalsh(h.conj().T @ h)[::-1]
    ev = np.clip(ev, 0.0, None)
    col = np.sum(np.abs(h) ** 2, axis=0)
    return ChannelGains(lam0=float(ev[0]), lam1=float(ev[-1]), lam_eff=float(col.max()))


def median_channel_gains(n_draws: int, rng: np.random.Generator,
                         n_rx: int = 2, n_tx: int = 2) -> ChannelGains:
    """Component-wise medians of the eigen-quantities over ``n_draws`` draws."""
    h = (rng.standard_normal((n_draws, n_rx, n_tx))
         + 1j * rng.standard_normal((n_draws, n_rx, n_tx))) / np.sqrt(2.0)
    gram = np.conj(np.swapaxes(h, 1, 2)) @ h
    ev = np.linalg.eigvalsh(gram)
    col = np.sum(np.abs(h) ** 2, axis=1)
    return ChannelGains(lam0=float(np.median(ev[:, -1])),
                        lam1=float(np.median(ev[:, 0])),
                        lam_eff=float(np.median(col.max(axis=1))))
