"""Energy-efficiency maximization per transmission mode.

The per-mode problem is a single-ratio fractional program: concave
effective throughput over affine power draw.  It is solved by the
quadratic transform, alternating a closed-form auxiliary update with a
one-dimensional root find of the first-order condition, which produces a
nondecreasing objective sequence converging to the global maximizer.

Internally the numerator uses the natural logarithm; reported rates and
efficiencies carry the single 1/ln2 factor, which moves no optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .channel import ChannelGains
from .config import ScenarioConfig
from .linkbudget import (MIMO_CP, SIMO_CP, SIMO_DFT, LinkBudgetInput, active_chains,
                         mimo_ptx, ru_power_at_se, simo_ptx, waveform_of)
from .pa import drain_efficiency

LN2 = math.log(2.0)

FULL_MIMO = "Full-MIMO"
SWITCH_CP = "Switch-CP"
SWITCH_DFT = "Switch-DFT"
MODES = (FULL_MIMO, SWITCH_CP, SWITCH_DFT)

_INNER_OPTIONS = {
    FULL_MIMO: (MIMO_CP,),
    SWITCH_CP: (SIMO_CP, MIMO_CP),
    SWITCH_DFT: (SIMO_DFT, MIMO_CP),
}


class NonconvergenceError(RuntimeError):
    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


class ConstraintConflictError(RuntimeError):
    """Target-rate power floor exceeds the saturation-backoff power cap."""


@dataclass(frozen=True)
class FractionalProblem:
    """One ratio: throughput over power, in the per-amplifier power variable.

    ``gains`` holds one normalized channel gain per active stream (large-
    scale gain times eigenvalue over noise power); its length fixes the
    number of active chains in the denominator.
    """

    gains: tuple[float, ...]
    eta: float           # drain efficiency at the mode's operating backoff
    p_circ_w: float
    alpha_oh: float
    bandwidth_hz: float
    p_min_w: float
    p_max_w: float

    def __post_init__(self):
        if not self.gains or any(c <= 0 for c in self.gains):
            raise ValueError("need at least one positive normalized gain")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.p_circ_w <= 0:
            raise ValueError("circuit power must be strictly positive")
        if not 0 <= self.p_min_w <= self.p_max_w:
            raise ValueError("need 0 <= p_min <= p_max")

    @property
    def m_act(self) -> int:
        return len(self.gains)

    def rate_factor(self) -> float:
        return self.alpha_oh * self.bandwidth_hz

    def numerator(self, p: float) -> float:
        """Effective throughput in natural-log units."""
        return self.rate_factor() * sum(math.log1p(c * p) for c in self.gains)

    def numerator_slope(self, p: float) -> float:
        return self.rate_factor() * sum(c / (1.0 + c * p) for c in self.gains)

    def denominator(self, p: float) -> float:
        return self.m_act * p / self.eta + self.p_circ_w

    def spectral_efficiency(self, p: float) -> float:
        return sum(math.log1p(c * p) for c in self.gains) / LN2


def objective_f(p: float, prob: FractionalProblem) -> float:
    """Energy efficiency at per-amplifier power ``p``, in bits per joule."""
    return prob.numerator(p) / prob.denominator(p) / LN2


def y_update(p: float, prob: FractionalProblem) -> float:
    """Closed-form auxiliary variable maximizing the transformed objective."""
    return math.sqrt(prob.numerator(p)) / prob.denominator(p)


def quadratic_transform(p: float, y: float, prob: FractionalProblem) -> float:
    """The transformed bivariate objective (natural-log units)."""
    return -prob.denominator(p) * y**2 + 2.0 * y * math.sqrt(prob.numerator(p))


def p_update(y: float, prob: FractionalProblem, rel_tol: float = 1e-10) -> float:
    """Unique stationary power for a fixed auxiliary value, by bisection.

    The first-order condition is written division-free as
    ``A'(p) - y * B' * sqrt(A(p)) = 0``; its left side is strictly
    decreasing, so the sign at the bounds decides clamping.
    """
    if y <= 0:
        return prob.p_max_w
    b_slope = prob.m_act / prob.eta

    def foc(p: float) -> float:
        return prob.numerator_slope(p) - y * b_slope * math.sqrt(prob.numerator(p))

    lo, hi = prob.p_min_w, prob.p_max_w
    if foc(lo) <= 0.0:
        return lo
    if foc(hi) >= 0.0:
        return hi
    width = rel_tol * max(prob.p_max_w, 1e-300)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if foc(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class FpSolution:
    p_star_w: float
    y_star: float
    ee_bits_per_joule: float
    trace: tuple[tuple[int, float, float], ...]
    iterations: int


def maximize_ee(prob: FractionalProblem, p0: float | None = None,
                eps_rel: float = 1e-9, max_iter: int = 1000) -> FpSolution:
    """Alternate the auxiliary and power updates until the power settles.

    The recorded objective trace is nondecreasing; a strict decrease can
    only be floating-point noise at the fixed point and stops the loop
    keeping the previous iterate.
    """
    p = 0.5 * (prob.p_min_w + prob.p_max_w) if p0 is None else float(p0)
    if not prob.p_min_w <= p <= prob.p_max_w:
        raise ValueError("initial power outside bounds")
    eps = eps_rel * max(prob.p_max_w, 1e-300)
    f_prev = objective_f(p, prob)
    trace = [(0, p, f_prev)]
    for k in range(1, max_iter + 1):
        y = y_update(p, prob)
        p_new = p_update(y, prob)
        f_new = objective_f(p_new, prob)
        if f_new < f_prev:
            break
        trace.append((k, p_new, f_new))
        if abs(p_new - p) <= eps:
            p, f_prev = p_new, f_new
            break
        p, f_prev = p_new, f_new
    else:
        raise NonconvergenceError(
            f"no convergence in {max_iter} iterations", tuple(trace))
    return FpSolution(p_star_w=p, y_star=y_update(p, prob), ee_bits_per_joule=f_prev,
                      trace=tuple(trace), iterations=trace[-1][0])


@dataclass(frozen=True)
class EeResult:
    """Optimizer output for one transmission mode."""

    mode: str
    inner: str               # selected single- or two-stream option
    b_db: float
    p_star_w: float          # per active amplifier
    y_star: float
    ee_bits_per_joule: float
    se_bits_hz: float
    p_ru_w: float
    trace: tuple[tuple[int, float, float], ...]
    iterations: int


def _normalized_gains(inner: str, gains: ChannelGains, cfg: ScenarioConfig) -> tuple[float, ...]:
    rho = cfg.large_scale_gain / cfg.noise_power_w
    if inner == MIMO_CP:
        return (rho * gains.lam0, rho * gains.lam1)
    return (rho * gains.lam_eff,)


def _power_floor(inner: str, se_target: float | None, cfg: ScenarioConfig,
                 gains: ChannelGains) -> float:
    if se_target is None:
        return cfg.p_min_w
    inp = LinkBudgetInput.from_config(cfg, gains)
    if inner == MIMO_CP:
        return mimo_ptx(se_target, inp) / 2.0
    return simo_ptx(se_target, inp)


def solve_mode(mode: str, gains: ChannelGains, cfg: ScenarioConfig,
               b_min_table: Mapping[str, float], se_target: float | None = None,
               backoff_grid_db: float = 0.0) -> EeResult:
    """Best energy efficiency for one mode, choosing its better inner option.

    Each inner option runs at its waveform's minimum compliant backoff: the
    efficiency law decreases with backoff and the power cap loosens as
    backoff shrinks, so the smallest feasible backoff dominates.  Passing
    ``backoff_grid_db > 0`` validates that argument numerically by also
    solving on a 0.5 dB backoff grid above the minimum and keeping the best.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    best: EeResult | None = None
    conflicts = []
    for inner in _INNER_OPTIONS[mode]:
        b_min = float(b_min_table[waveform_of(inner)])
        backoffs = [b_min]
        if backoff_grid_db > 0:
            backoffs += list(np.arange(b_min + 0.5, b_min + backoff_grid_db + 0.25, 0.5))
        for b_db in backoffs:
            p_max = cfg.pa.p_sat_w * 10.0 ** (-b_db / 10.0)
            p_min = _power_floor(inner, se_target, cfg, gains)
            if p_min > p_max:
                conflicts.append(
                    f"{inner}: power floor {p_min:.4g} W exceeds saturation cap "
                    f"{p_max:.4g} W at {b_db:.2f} dB backoff")
                continue
            prob = FractionalProblem(gains=_normalized_gains(inner, gains, cfg),
                                     eta=drain_efficiency(b_db, cfg.pa),
                                     p_circ_w=cfg.circuit.total_w(active_chains(inner)),
                                     alpha_oh=cfg.overhead_factor,
                                     bandwidth_hz=cfg.bandwidth_hz,
                                     p_min_w=p_min, p_max_w=p_max)
            sol = maximize_ee(prob)
            result = EeResult(mode=mode, inner=inner, b_db=b_db, p_star_w=sol.p_star_w,
                              y_star=sol.y_star,
                              ee_bits_per_joule=sol.ee_bits_per_joule,
                              se_bits_hz=prob.spectral_efficiency(sol.p_star_w),
                              p_ru_w=prob.denominator(sol.p_star_w),
                              trace=sol.trace, iterations=sol.iterations)
            if best is None or result.ee_bits_per_joule > best.ee_bits_per_joule:
                best = result
    if best is None:
        raise ConstraintConflictError("; ".join(conflicts))
    return best


@dataclass(frozen=True)
class SweepCell:
    """One (spectral efficiency, mode) cell of the power/efficiency sweep."""

    se_bits_hz: float
    mode: str
    inner: str
    b_db: float
    p_tx_w: float            # per active amplifier
    p_ru_w: float
    ee_bits_per_joule: float
    feasible: bool


def sweep_modes(cfg: ScenarioConfig, se_grid: Sequence[float], gains: ChannelGains,
                b_min_table: Mapping[str, float]) -> list[SweepCell]:
    """Required radio-unit power and efficiency per mode over a rate grid.

    Each cell picks the mode's cheaper feasible inner option; infeasible
    cells are marked, not fatal.
    """
    inp = LinkBudgetInput.from_config(cfg, gains)
    cells = []
    for se in se_grid:
        se = float(se)
        for mode in MODES:
            chosen = None
            for inner in _INNER_OPTIONS[mode]:
                b_db = float(b_min_table[waveform_of(inner)])
                breakdown = ru_power_at_se(se, inner, inp, cfg.circuit, cfg.pa, b_db)
                if breakdown is None:
                    continue
                if chosen is None or breakdown.p_ru_w < chosen[1].p_ru_w:
                    chosen = (inner, breakdown, b_db)
            if chosen is None:
                cells.append(SweepCell(se, mode, "", math.nan, math.nan, math.nan,
                                       math.nan, False))
            else:
                inner, breakdown, b_db = chosen
                ee = cfg.overhead_factor * cfg.bandwidth_hz * se / breakdown.p_ru_w
                cells.append(SweepCell(se, mode, inner, b_db,
                                       breakdown.per_pa[0].p_tx_w, breakdown.p_ru_w,
                                       ee, True))
    return cells
