"""Receive chain and distortion measurement.

Per trial: modulate, spread, map, inverse transform, backoff and amplify,
fade and add noise, forward transform, estimate the linear amplifier gain,
tone-wise MMSE equalize, despread, accumulate symbol errors.  The equalizer
uses the linearized per-tone channel (estimated scalar gain times the tap
response); the data-dependent full-matrix equalizer exists only as a test
oracle at small grid sizes.

Pooled error magnitude is deterministic given (seed, trials): every trial
derives its own random streams and reduction runs in trial order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import channel as chan
from . import pa as pa_mod
from . import waveform as wf
from .config import PaProfile, ScenarioConfig
from .rng import stream


class InfeasibleEvmError(RuntimeError):
    """The requirement cannot be met anywhere in the search bracket."""


@dataclass(frozen=True)
class LinkParams:
    """Dimensions and impairments of the measured link, config-independent."""

    allocated_tones: int
    fft_size: int
    modulation_order: int
    mapping_scheme: str
    oversample: int
    evm_snr_db: float
    delay_spread_ns: float
    subcarrier_spacing_hz: float
    pa: PaProfile
    guard_tones: int | None = None

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "LinkParams":
        return cls(allocated_tones=cfg.allocated_tones, fft_size=cfg.fft_size,
                   modulation_order=cfg.modulation_order,
                   mapping_scheme=cfg.mapping_scheme,
                   oversample=cfg.oversample_factor, evm_snr_db=cfg.evm_snr_db,
                   delay_spread_ns=cfg.delay_spread_ns,
                   subcarrier_spacing_hz=cfg.subcarrier_spacing_hz, pa=cfg.pa,
                   guard_tones=cfg.guard_tones)

    @property
    def total_samples(self) -> int:
        return self.fft_size * self.oversample

    @property
    def sample_rate_hz(self) -> float:
        return self.total_samples * self.subcarrier_spacing_hz


def noise_variance(link: LinkParams, backoff_db: float) -> float:
    """Per-sample AWGN variance giving the configured per-tone receive SNR.

    The mean received tone power is the amplifier output power spread over
    the allocation (unit mean-square tone response), so the variance scales
    with the backoff target and is data-independent.
    """
    if math.isinf(link.evm_snr_db):
        return 0.0
    p_out = 10.0 ** (-backoff_db / 10.0)
    per_tone = link.total_samples * p_out / link.allocated_tones
    return per_tone / 10.0 ** (link.evm_snr_db / 10.0)


@dataclass
class TrialRecord:
    """Everything one trial produced, kept for equalization and oracles."""

    data_symbols: np.ndarray
    mapping: np.ndarray          # centered-grid indices at the oversampled size
    x_ref: np.ndarray            # unit-scale time signal before backoff
    x_in: np.ndarray             # amplifier input (scaled)
    x_out: np.ndarray            # amplifier output
    scale: float
    gain: complex                # estimated linear amplifier gain
    realization: chan.ChannelRealization
    rx_freq: np.ndarray          # unitary transform of the received signal
    h_eff: np.ndarray            # linearized per-tone channel, natural order
    sigma2: float


def run_trial(link: LinkParams, waveform_kind: str, backoff_db: float,
              seed: int, trial: int) -> TrialRecord:
    """Generate, transmit, and receive one symbol; no equalization yet."""
    m = link.allocated_tones
    bits_per_symbol = int(round(math.log2(link.modulation_order)))
    bits_rng = stream(seed, trial, "bits")
    bits = bits_rng.integers(0, 2, size=m * bits_per_symbol)
    d = wf.qam_modulate(bits, link.modulation_order)
    frame = wf.build_frame(d, link.fft_size, link.mapping_scheme, waveform_kind,
                           link.oversample, link.guard_tones)
    total = link.total_samples
    mapping = frame.mapping + (total - link.fft_size) // 2

    x_in = pa_mod.apply_backoff(frame.time_samples, backoff_db, link.pa)
    scale = math.sqrt(float(np.mean(np.abs(x_in) ** 2))
                      / float(np.mean(np.abs(frame.time_samples) ** 2)))
    x_out = pa_mod.rapp_gain(x_in, link.pa)
    gain = pa_mod.bussgang_gain(x_in, x_out)

    sigma2 = noise_variance(link, backoff_db)
    realization = chan.draw_tdlc(link.delay_spread_ns, link.sample_rate_hz, total,
                                 stream(seed, trial, "channel"), sigma2)
    y = chan.apply_channel(x_out, realization, stream(seed, trial, "noise"))
    rx_freq = np.fft.fft(y) / math.sqrt(total)
    h_eff = gain * scale * realization.freq_response
    return TrialRecord(data_symbols=d, mapping=mapping, x_ref=frame.time_samples,
                       x_in=x_in, x_out=x_out, scale=scale, gain=gain,
                       realization=realization, rx_freq=rx_freq, h_eff=h_eff,
                       sigma2=sigma2)


def mmse_equalize(rx_freq: np.ndarray, h_eff: np.ndarray, sigma2: float) -> np.ndarray:
    """Tone-wise MMSE filter; collapses to zero forcing as the noise vanishes."""
    h = np.asarray(h_eff)
    w = np.conj(h) / (np.abs(h) ** 2 + sigma2)
    return w * np.asarray(rx_freq)


def despread(grid_eq: np.ndarray, mapping: np.ndarray, waveform_kind: str) -> np.ndarray:
    """Extract the allocated tones and undo the spreading transform.

    ``grid_eq`` is in natural DFT order (a transform output); ``mapping``
    holds the centered-grid allocation indices of the transmit frame.
    """
    grid_eq = np.asarray(grid_eq)
    n = grid_eq.shape[-1]
    mapping = np.asarray(mapping)
    if mapping.min() < 0 or mapping.max() >= n or np.unique(mapping).size != mapping.size:
        raise ValueError("mapping does not match the received grid")
    vals = grid_eq[..., wf.natural_bins(mapping, n)]
    if waveform_kind == wf.DFT_S_OFDM:
        return np.fft.ifft(vals, axis=-1) * math.sqrt(vals.shape[-1])
    if waveform_kind == wf.CP_OFDM:
        return vals
    raise ValueError(f"unknown waveform {waveform_kind!r}")


@dataclass(frozen=True)
class EvmReport:
    """Pooled and per-trial error vector magnitude for one operating point."""

    evm_rms: float
    evm_db: float
    trials: int
    per_trial_db: tuple[float, ...]
    waveform_kind: str
    backoff_db: float


def measure_evm_link(link: LinkParams, waveform_kind: str, backoff_db: float,
                     trials: int, seed: int) -> EvmReport:
    """Pooled EVM over ``trials`` independent symbols at one backoff."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    err_total = 0.0
    ref_total = 0.0
    per_trial = []
    for t in range(trials):
        rec = run_trial(link, waveform_kind, backoff_db, seed, t)
        eq = mmse_equalize(rec.rx_freq, rec.h_eff, rec.sigma2)
        d_hat = despread(eq, rec.mapping, waveform_kind)
        err = float(np.sum(np.abs(d_hat - rec.data_symbols) ** 2))
        ref = float(np.sum(np.abs(rec.data_symbols) ** 2))
        err_total += err
        ref_total += ref
        per_trial.append(10.0 * math.log10(err / ref))
    evm_rms = math.sqrt(err_total / ref_total)
    return EvmReport(evm_rms=evm_rms, evm_db=20.0 * math.log10(evm_rms),
                     trials=trials, per_trial_db=tuple(per_trial),
                     waveform_kind=waveform_kind, backoff_db=backoff_db)


def measure_evm(cfg: ScenarioConfig, waveform_kind: str, backoff_db: float,
                trials: int | None = None, seed: int | None = None) -> EvmReport:
    """Config-level wrapper around :func:`measure_evm_link`."""
    return measure_evm_link(LinkParams.from_config(cfg), waveform_kind, backoff_db,
                            cfg.trials if trials is None else trials,
                            cfg.seed if seed is None else seed)


def min_backoff_link(link: LinkParams, waveform_kind: str, evm_req_db: float,
                     trials: int, seed: int, bracket: tuple[float, float] = (0.0, 20.0),
                     tol_db: float = 0.05) -> float:
    """Smallest backoff meeting the requirement, by bisection.

    The random seed is frozen across probes, so pooled EVM is a
    deterministic decreasing function of backoff and bisection is valid.
    Returns the feasible (upper) end of the final bracket.
    """
    lo, hi = bracket
    report = measure_evm_link(link, waveform_kind, hi, trials, seed)
    if report.evm_db > evm_req_db:
        raise InfeasibleEvmError(
            f"{waveform_kind}: EVM at {hi:.1f} dB backoff is {report.evm_db:.2f} dB, "
            f"requirement {evm_req_db:.2f} dB unreachable in bracket {bracket}")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if measure_evm_link(link, waveform_kind, mid, trials, seed).evm_db <= evm_req_db:
            hi = mid
        else:
            lo = mid
    return hi


def min_backoff(cfg: ScenarioConfig, waveform_kind: str, evm_req_db: float,
                trials: int | None = None, seed: int | None = None,
                bracket: tuple[float, float] = (0.0, 20.0)) -> float:
    return min_backoff_link(LinkParams.from_config(cfg), waveform_kind, evm_req_db,
                            cfg.trials if trials is None else trials,
                            cfg.seed if seed is None else seed, bracket)


def min_backoff_table(cfg: ScenarioConfig, evm_req_db: float | None = None,
                      trials: int | None = None, seed: int | None = None) -> dict[str, float]:
    """Minimum backoff per waveform at the sweep requirement."""
    req = cfg.sweep_evm_req_db if evm_req_db is None else evm_req_db
    return {kind: min_backoff(cfg, kind, req, trials, seed) for kind in wf.WAVEFORMS}


def constellation_sample(cfg: ScenarioConfig, waveform_kind: str, backoff_db: float,
                         seed: int, trials: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Reference and equalized symbols for scatter plots."""
    link = LinkParams.from_config(cfg)
    ref, est = [], []
    for t in range(trials):
        rec = run_trial(link, waveform_kind, backoff_db, seed, t)
        eq = mmse_equalize(rec.rx_freq, rec.h_eff, rec.sigma2)
        ref.append(rec.data_symbols)
        est.append(despread(eq, rec.mapping, waveform_kind))
    return np.concatenate(ref), np.concatenate(est)
