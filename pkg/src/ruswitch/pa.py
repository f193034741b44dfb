"""Memoryless amplifier model: modified-Rapp distortion, backoff, efficiency.

The signal chain runs in normalized amplitude units with the saturation
amplitude fixed at 1; absolute wattage enters only through the dB
bookkeeping of :class:`BackoffPoint`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PaProfile

A_SAT = 1.0


class UnreachableBackoffError(RuntimeError):
    """Requested mean output power lies above what compression allows."""

    def __init__(self, b_db: float, feasible_min_db: float):
        self.b_db = b_db
        self.feasible_min_db = feasible_min_db
        super().__init__(
            f"backoff {b_db:.3f} dB unreachable; feasible minimum is about "
            f"{feasible_min_db:.3f} dB for this signal")


def rapp_gain(samples: np.ndarray, profile: PaProfile) -> np.ndarray:
    """Amplifier response sample by sample.

    Output magnitude is the Rapp AM/AM curve evaluated at the input
    magnitude; output phase adds the fitted AM/PM shift.  Total function,
    zero maps to zero.
    """
    x = np.asarray(samples, dtype=complex)
    r = np.abs(x)
    s = profile.smoothness
    am = r * (1.0 + (r / A_SAT) ** (2.0 * s)) ** (-1.0 / (2.0 * s))
    pm = profile.am_pm_alpha * r ** profile.am_pm_q1 \
        / (1.0 + (r / profile.am_pm_beta) ** profile.am_pm_q2)
    return am * np.exp(1j * (np.angle(x) + pm))


def _mean_out_power(x: np.ndarray, scale: float, profile: PaProfile) -> float:
    return float(np.mean(np.abs(rapp_gain(scale * x, profile)) ** 2))


def backoff_scale(x: np.ndarray, b_db: float, profile: PaProfile,
                  tol_db: float = 0.05, max_iter: int = 30) -> tuple[float, int]:
    """Input scale placing the mean amplifier output at ``A_SAT^2 * 10^(-b/10)``.

    Iterative scale search: a fixed-point power-matching update accelerated
    by a log-log secant step, guarded by bisection once the target is
    bracketed.  Returns ``(scale, evaluations)``.
    """
    if b_db < 0:
        raise ValueError("backoff must be >= 0 dB")
    x = np.asarray(x, dtype=complex)
    p_in = float(np.mean(np.abs(x) ** 2))
    if p_in == 0:
        raise ValueError("input signal has zero power")
    target = A_SAT**2 * 10.0 ** (-b_db / 10.0)
    s = math.sqrt(target / p_in)
    lo = hi = None          # bracket in scale: p(lo) < target < p(hi)
    prev = None             # last (log s, log p) pair for the secant step
    best_p = 0.0
    for it in range(1, max_iter + 1):
        p = _mean_out_power(x, s, profile)
        best_p = max(best_p, p)
        if abs(10.0 * math.log10(p / target)) <= tol_db:
            return s, it
        if p < target:
            lo = s if lo is None else max(lo, s)
        else:
            hi = s if hi is None else min(hi, s)
        step = s * math.sqrt(target / p)
        if prev is not None and prev[1] != math.log(p):
            ls, lp = prev
            slope = (math.log(s) - ls) / (math.log(p) - lp)
            secant = math.exp(math.log(s) + slope * (math.log(target) - math.log(p)))
            if math.isfinite(secant) and secant > 0:
                step = secant
        prev = (math.log(s), math.log(p))
        if lo is not None and hi is not None and not (lo < step < hi):
            step = math.sqrt(lo * hi)
        s = step
    if hi is None:
        raise UnreachableBackoffError(b_db, -10.0 * math.log10(best_p / A_SAT**2))
    raise RuntimeError(f"backoff scale search did not converge in {max_iter} iterations")


def apply_backoff(x: np.ndarray, b_db: float, profile: PaProfile) -> np.ndarray:
    """Rescale ``x`` so the amplified signal sits at output backoff ``b_db``."""
    scale, _ = backoff_scale(x, b_db, profile)
    return scale * np.asarray(x, dtype=complex)


def bussgang_gain(x_in: np.ndarray, x_out: np.ndarray) -> complex:
    """Least-squares linear gain; the residual is orthogonal to the input."""
    x_in = np.asarray(x_in).reshape(-1)
    x_out = np.asarray(x_out).reshape(-1)
    energy = np.vdot(x_in, x_in)
    if energy == 0:
        raise ValueError("zero-energy input")
    return complex(np.vdot(x_in, x_out) / energy)


@dataclass(frozen=True)
class BackoffPoint:
    """Amplifier operating point: backoff, RF output, DC draw, efficiency."""

    b_db: float
    p_tx_w: float
    p_dc_w: float
    eta: float


def drain_efficiency(b_db: float, profile: PaProfile) -> float:
    """Square-root efficiency law: halves for every 6 dB of extra backoff."""
    if b_db < 0:
        raise ValueError("backoff must be >= 0 dB")
    return min(profile.eta_sat, profile.eta_sat * 10.0 ** (-b_db / 20.0))


def pa_dc_power(b_db: float, profile: PaProfile) -> BackoffPoint:
    """Operating point of one amplifier driven at output backoff ``b_db``."""
    eta = drain_efficiency(b_db, profile)
    p_tx = profile.p_sat_w * 10.0 ** (-b_db / 10.0)
    return BackoffPoint(b_db=b_db, p_tx_w=p_tx, p_dc_w=p_tx / eta, eta=eta)
