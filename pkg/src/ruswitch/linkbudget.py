"""Closed-form rate/power conversions and radio-unit power accounting.

Transmit power for a target spectral efficiency comes from inverting the
equal-allocation 2x2 rate expression (positive root of a quadratic) or the
single-stream rate for antenna selection.  Radio-unit power is the DC draw
of the active amplifiers plus static circuit power; each amplifier's drain
efficiency is evaluated at its mode's operating backoff, the minimum that
meets the distortion requirement, which is what lets a lower-backoff
waveform spend less DC power for the same radiated power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import ChannelGains
from .config import CircuitProfile, PaProfile, ScenarioConfig
from .pa import BackoffPoint, drain_efficiency
from .waveform import CP_OFDM, DFT_S_OFDM

LN2 = math.log(2.0)

SIMO_CP = "SIMO-CP"
SIMO_DFT = "SIMO-DFT"
MIMO_CP = "MIMO-CP"
INNER_MODES = (SIMO_CP, SIMO_DFT, MIMO_CP)


class RankDeficientError(ValueError):
    """Second eigenvalue is zero; the two-stream inversion does not apply."""


class SaturationCapError(RuntimeError):
    """Requested transmit power exceeds the backoff-limited amplifier cap."""


def waveform_of(inner_mode: str) -> str:
    if inner_mode == SIMO_DFT:
        return DFT_S_OFDM
    if inner_mode in (SIMO_CP, MIMO_CP):
        return CP_OFDM
    raise ValueError(f"unknown mode {inner_mode!r}")


def active_chains(inner_mode: str) -> int:
    return 1 if inner_mode in (SIMO_CP, SIMO_DFT) else 2


@dataclass(frozen=True)
class LinkBudgetInput:
    """Scalars the closed forms need: gain, noise, eigenvalue statistics."""

    gain: float            # large-scale channel gain, linear
    noise_power_w: float   # noise density times bandwidth
    lam0: float
    lam1: float
    lam_eff: float
    bandwidth_hz: float

    def __post_init__(self):
        if self.gain <= 0 or self.noise_power_w <= 0 or self.bandwidth_hz <= 0:
            raise ValueError("gain, noise power, and bandwidth must be positive")
        if self.lam0 < self.lam1:
            raise ValueError("eigenvalues must be sorted descending")

    @classmethod
    def from_config(cls, cfg: ScenarioConfig, gains: ChannelGains) -> "LinkBudgetInput":
        return cls(gain=cfg.large_scale_gain, noise_power_w=cfg.noise_power_w,
                   lam0=gains.lam0, lam1=gains.lam1, lam_eff=gains.lam_eff,
                   bandwidth_hz=cfg.bandwidth_hz)


def mimo_se(p_tx_w: float, inp: LinkBudgetInput) -> float:
    """Two-stream spectral efficiency at total transmit power ``p_tx_w``."""
    if p_tx_w < 0:
        raise ValueError("transmit power must be >= 0")
    snr = inp.gain * p_tx_w / inp.noise_power_w
    return (math.log1p(snr / 2.0 * inp.lam0) + math.log1p(snr / 2.0 * inp.lam1)) / LN2


def mimo_ptx(se: float, inp: LinkBudgetInput) -> float:
    """Total transmit power achieving two-stream spectral efficiency ``se``.

    Positive root of the quadratic obtained from the two-stream rate; the
    difference of the root pair is evaluated in a cancellation-free form.
    """
    if se < 0:
        raise ValueError("spectral efficiency must be >= 0")
    if inp.lam0 <= 0 or inp.lam1 <= 0:
        raise RankDeficientError(
            "zero eigenvalue: use the single-stream inversion instead")
    mean = 0.5 * (inp.lam0 + inp.lam1)
    growth = inp.lam0 * inp.lam1 * math.expm1(se * LN2)
    root_gap = growth / (math.sqrt(mean**2 + growth) + mean)
    return 2.0 * inp.noise_power_w / (inp.gain * inp.lam0 * inp.lam1) * root_gap


def simo_se(p_tx_w: float, inp: LinkBudgetInput) -> float:
    """Single-stream spectral efficiency at transmit power ``p_tx_w``."""
    if p_tx_w < 0:
        raise ValueError("transmit power must be >= 0")
    return math.log1p(inp.gain * p_tx_w * inp.lam_eff / inp.noise_power_w) / LN2


def simo_ptx(se: float, inp: LinkBudgetInput) -> float:
    """Transmit power achieving single-stream spectral efficiency ``se``."""
    if se < 0:
        raise ValueError("spectral efficiency must be >= 0")
    if inp.lam_eff <= 0:
        raise ValueError("lam_eff must be positive")
    return inp.noise_power_w * math.expm1(se * LN2) / (inp.gain * inp.lam_eff)


@dataclass(frozen=True)
class RuPowerBreakdown:
    """Radio-unit power split into amplifier DC draw and circuit power."""

    p_pa_total_w: float
    p_circ_w: float
    p_ru_w: float
    m_act: int
    per_pa: tuple[BackoffPoint, ...]


def ru_power(inner_mode: str, p_tx_per_pa_w: float, circuit: CircuitProfile,
             pa: PaProfile, b_min_db: float = 0.0) -> RuPowerBreakdown:
    """Total radio-unit power when each active amplifier radiates
    ``p_tx_per_pa_w`` under the mode's operating backoff ``b_min_db``.

    The per-amplifier cap is the saturation power reduced by the mode's
    backoff; exceeding it raises :class:`SaturationCapError`.
    """
    if p_tx_per_pa_w < 0:
        raise ValueError("transmit power must be >= 0")
    m_act = active_chains(inner_mode)
    cap = pa.p_sat_w * 10.0 ** (-b_min_db / 10.0)
    if p_tx_per_pa_w > cap * (1.0 + 1e-12):
        raise SaturationCapError(
            f"{inner_mode}: {p_tx_per_pa_w:.4g} W per amplifier exceeds the "
            f"saturation cap {cap:.4g} W at {b_min_db:.2f} dB backoff")
    eta = drain_efficiency(b_min_db, pa)
    if p_tx_per_pa_w > 0:
        b_actual = 10.0 * math.log10(pa.p_sat_w / p_tx_per_pa_w)
        p_dc = p_tx_per_pa_w / eta
    else:
        b_actual = math.inf
        p_dc = 0.0
    point = BackoffPoint(b_db=b_actual, p_tx_w=p_tx_per_pa_w, p_dc_w=p_dc, eta=eta)
    p_circ = circuit.total_w(m_act)
    p_pa_total = m_act * p_dc
    return RuPowerBreakdown(p_pa_total_w=p_pa_total, p_circ_w=p_circ,
                            p_ru_w=p_pa_total + p_circ, m_act=m_act,
                            per_pa=(point,) * m_act)


def ru_power_at_se(se: float, inner_mode: str, inp: LinkBudgetInput,
                   circuit: CircuitProfile, pa: PaProfile,
                   b_min_db: float) -> RuPowerBreakdown | None:
    """Radio-unit power to hit ``se`` with ``inner_mode``; None if infeasible."""
    if inner_mode == MIMO_CP:
        p_total = mimo_ptx(se, inp)
        per_pa = p_total / 2.0
    else:
        per_pa = simo_ptx(se, inp)
    cap = pa.p_sat_w * 10.0 ** (-b_min_db / 10.0)
    if per_pa > cap:
        return None
    return ru_power(inner_mode, per_pa, circuit, pa, b_min_db)


@dataclass(frozen=True)
class CrossoverPoint:
    se: float
    p_ru_w: float
    mode_simo: str


def crossover(inp: LinkBudgetInput, mode_simo: str, se_grid, circuit: CircuitProfile,
              pa: PaProfile, b_min_simo_db: float,
              b_min_mimo_db: float) -> CrossoverPoint | None:
    """Spectral efficiency where the single- and two-stream radio-unit
    power curves meet, refined by bisection; None when the difference never
    changes sign on the mutually feasible part of the grid.
    """
    if mode_simo not in (SIMO_CP, SIMO_DFT):
        raise ValueError(f"mode_simo must be a single-stream mode, got {mode_simo!r}")

    def diff(se: float) -> float | None:
        s = ru_power_at_se(se, mode_simo, inp, circuit, pa, b_min_simo_db)
        m = ru_power_at_se(se, MIMO_CP, inp, circuit, pa, b_min_mimo_db)
        if s is None or m is None:
            return None
        return s.p_ru_w - m.p_ru_w

    grid = [float(s) for s in se_grid]
    if not grid:
        raise ValueError("empty grid")
    prev_se, prev_d = None, None
    for se in grid:
        d = diff(se)
        if d is None:
            break
        if prev_d is not None and (prev_d <= 0.0 < d or prev_d >= 0.0 > d):
            lo, hi = prev_se, se
            d_lo = prev_d
            while hi - lo > 1e-6:
                mid = 0.5 * (lo + hi)
                d_mid = diff(mid)
                if (d_lo <= 0.0) == (d_mid <= 0.0):
                    lo, d_lo = mid, d_mid
                else:
                    hi = mid
            se_star = 0.5 * (lo + hi)
            p_star = ru_power_at_se(se_star, mode_simo, inp, circuit, pa,
                                    b_min_simo_db).p_ru_w
            return CrossoverPoint(se=se_star, p_ru_w=p_star, mode_simo=mode_simo)
        prev_se, prev_d = se, d
    return None
