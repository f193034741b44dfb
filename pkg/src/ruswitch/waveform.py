"""Transmit-side signal chain for CP-OFDM and DFT-spread OFDM.

Both waveforms share one pipeline: modulate, spread (identity for CP-OFDM),
map onto the tone grid, inverse transform.  The grid uses a centered layout:
index ``fft_size // 2`` is DC, so a localized allocation is a contiguous
block around the middle of the vector.  All transforms are unitary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import stream

CP_OFDM = "cp-ofdm"
DFT_S_OFDM = "dft-s-ofdm"
WAVEFORMS = (CP_OFDM, DFT_S_OFDM)


def _gray_axis_levels(bits_per_axis: int) -> np.ndarray:
    """Per-axis amplitude levels indexed by the Gray-coded bit pattern.

    The all-zero pattern maps to the most positive level, so QPSK bits 00
    produce the (+1+j) corner before scaling.
    """
    n_levels = 1 << bits_per_axis
    pattern = np.arange(n_levels)
    binary = pattern.copy()
    shift = pattern >> 1
    while np.any(shift):
        binary ^= shift
        shift >>= 1
    return (n_levels - 1) - 2.0 * binary


def qam_alphabet(order: int) -> np.ndarray:
    """All ``order`` constellation points in bit-pattern index order, unit mean power."""
    bits_per_axis = _axis_bits(order)
    levels = _gray_axis_levels(bits_per_axis)
    side = 1 << bits_per_axis
    re = np.repeat(levels, side)
    im = np.tile(levels, side)
    scale = math.sqrt(2.0 * (side**2 - 1) / 3.0)
    return (re + 1j * im) / scale


def _axis_bits(order: int) -> int:
    k = int(round(math.log2(order)))
    if 2**k != order or k % 2 != 0 or order < 4:
        raise ValueError(f"unsupported QAM order {order}: need a square power of four")
    return k // 2


def qam_modulate(bits: np.ndarray, order: int) -> np.ndarray:
    """Gray-mapped square QAM, scaled to unit average constellation power.

    ``bits`` is a flat 0/1 sequence; each symbol consumes ``log2(order)``
    bits, first half selecting the in-phase level, second half quadrature.
    """
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    k = 2 * _axis_bits(order)
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} not divisible by {k}")
    groups = bits.reshape(-1, k)
    half = k // 2
    weights = 1 << np.arange(half - 1, -1, -1)
    idx_i = groups[:, :half] @ weights
    idx_q = groups[:, half:] @ weights
    levels = _gray_axis_levels(half)
    side = 1 << half
    scale = math.sqrt(2.0 * (side**2 - 1) / 3.0)
    return (levels[idx_i] + 1j * levels[idx_q]) / scale


def dft_spread(d: np.ndarray) -> np.ndarray:
    """Unitary forward DFT over the allocation (1/sqrt(M) normalization)."""
    d = np.asarray(d)
    return np.fft.fft(d, axis=-1) / math.sqrt(d.shape[-1])


def map_tones(spread: np.ndarray, fft_size: int, scheme: str,
              guard_tones: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Place the spread symbols on the centered tone grid.

    Returns ``(grid, mapping)`` where ``mapping[j]`` is the centered-grid
    index carrying ``spread[j]``.  ``localized`` uses one contiguous block
    around the center; ``split-localized`` uses two half-size blocks placed
    symmetrically about the center, each ``guard_tones`` away from its band
    edge (default ``(fft_size - M) // 4``).
    """
    spread = np.asarray(spread)
    m = spread.shape[-1]
    n = int(fft_size)
    if m > n:
        raise ValueError(f"allocation of {m} tones exceeds grid of {n}")
    if scheme == "localized":
        start = (n - m) // 2
        mapping = np.arange(start, start + m)
    elif scheme == "split-localized":
        if m % 2:
            raise ValueError("split-localized mapping needs an even tone count")
        half = m // 2
        guard = (n - m) // 4 if guard_tones is None else int(guard_tones)
        if guard < 0 or 2 * guard + m > n:
            raise ValueError(f"guard of {guard} tones does not fit {m} tones in {n}")
        lower = np.arange(guard, guard + half)
        upper = np.arange(n - guard - half, n - guard)
        mapping = np.concatenate([lower, upper])
    else:
        raise ValueError(f"unknown mapping scheme {scheme!r}")
    grid_shape = spread.shape[:-1] + (n,)
    grid = np.zeros(grid_shape, dtype=complex)
    grid[..., mapping] = spread
    return grid, mapping


def natural_bins(mapping: np.ndarray, fft_size: int) -> np.ndarray:
    """Translate centered-grid indices to natural DFT bin numbers."""
    return (np.asarray(mapping) - fft_size // 2) % fft_size


def to_time_domain(grid: np.ndarray, oversample: int = 1) -> np.ndarray:
    """Unitary inverse transform of the centered grid, optionally oversampled.

    Oversampling pads the centered grid symmetrically with zeros before the
    inverse transform, preserving total energy (Parseval holds at any rate).
    """
    grid = np.asarray(grid)
    n = grid.shape[-1]
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    if oversample > 1:
        total = n * oversample
        left = (total - n) // 2
        pad = [(0, 0)] * (grid.ndim - 1) + [(left, total - n - left)]
        grid = np.pad(grid, pad)
    total = grid.shape[-1]
    return np.fft.ifft(np.fft.ifftshift(grid, axes=-1), axis=-1) * math.sqrt(total)


def from_time_domain(x: np.ndarray) -> np.ndarray:
    """Unitary forward transform back to the centered grid (inverse of the above)."""
    x = np.asarray(x)
    total = x.shape[-1]
    return np.fft.fftshift(np.fft.fft(x, axis=-1), axes=-1) / math.sqrt(total)


def papr(x: np.ndarray) -> float:
    """Peak-to-average power ratio in dB; rejects empty or all-zero input."""
    x = np.asarray(x).reshape(-1)
    if x.size == 0:
        raise ValueError("papr of empty sequence")
    power = np.abs(x) ** 2
    mean = power.mean()
    if mean == 0:
        raise ValueError("papr of all-zero sequence")
    return 10.0 * math.log10(power.max() / mean)


@dataclass(frozen=True)
class SymbolFrame:
    """One transmit symbol: data, spread view, tone grid, time samples."""

    data_symbols: np.ndarray
    spread_symbols: np.ndarray
    grid: np.ndarray
    time_samples: np.ndarray
    waveform_kind: str
    mapping: np.ndarray


def build_frame(d: np.ndarray, fft_size: int, scheme: str, waveform_kind: str,
                oversample: int = 1, guard_tones: int | None = None) -> SymbolFrame:
    """Run the shared transmit pipeline for either waveform."""
    if waveform_kind not in WAVEFORMS:
        raise ValueError(f"unknown waveform {waveform_kind!r}")
    d = np.asarray(d, dtype=complex)
    spread = dft_spread(d) if waveform_kind == DFT_S_OFDM else d.copy()
    grid, mapping = map_tones(spread, fft_size, scheme, guard_tones)
    x = to_time_domain(grid, oversample)
    return SymbolFrame(d, spread, grid, x, waveform_kind, mapping)


_PAPR_CHUNK = 1024


def papr_samples(num_symbols: int, allocated_tones: int, fft_size: int, order: int,
                 scheme: str, waveform_kind: str, oversample: int,
                 seed: int, guard_tones: int | None = None) -> np.ndarray:
    """PAPR of ``num_symbols`` independent random symbols, one dB value each.

    Symbols are generated in fixed-size chunks with one random stream per
    chunk, so the output depends only on ``seed`` and the arguments.
    """
    bits_per = 2 * _axis_bits(order)
    _, mapping = map_tones(np.zeros(allocated_tones), fft_size, scheme, guard_tones)
    total = fft_size * oversample
    bins = natural_bins(mapping + (total - fft_size) // 2, total)
    out = np.empty(num_symbols)
    done = 0
    chunk_idx = 0
    while done < num_symbols:
        count = min(_PAPR_CHUNK, num_symbols - done)
        rng = stream(seed, chunk_idx, "papr")
        bits = rng.integers(0, 2, size=count * allocated_tones * bits_per)
        d = qam_modulate(bits, order).reshape(count, allocated_tones)
        spread = dft_spread(d) if waveform_kind == DFT_S_OFDM else d
        # natural-order grid built directly; same samples as the centered path
        grid = np.zeros((count, total), dtype=complex)
        grid[:, bins] = spread
        x = np.fft.ifft(grid, axis=1)
        power = x.real**2 + x.imag**2
        out[done:done + count] = 10.0 * np.log10(power.max(axis=1) / power.mean(axis=1))
        done += count
        chunk_idx += 1
    return out


def ccdf_level(papr_db: np.ndarray, prob: float) -> float:
    """PAPR threshold exceeded with probability ``prob``."""
    if not 0 < prob < 1:
        raise ValueError("prob must lie in (0, 1)")
    return float(np.quantile(np.asarray(papr_db), 1.0 - prob))
