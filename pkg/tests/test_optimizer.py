import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ruswitch import linkbudget as lb
from ruswitch import optimizer as opt
from ruswitch.channel import ChannelGains
from ruswitch.config import default_scenario

CFG = default_scenario()
GAINS = ChannelGains(lam0=3.2, lam1=0.35, lam_eff=2.5)
BMIN = {"cp-ofdm": 7.3, "dft-s-ofdm": 5.8}


def simo_problem(c=1.0, eta=1.0, p_circ=1.0, alpha=1.0, bw=1.0, p_min=0.0, p_max=10.0):
    return opt.FractionalProblem(gains=(c,), eta=eta, p_circ_w=p_circ, alpha_oh=alpha,
                                 bandwidth_hz=bw, p_min_w=p_min, p_max_w=p_max)


def random_problem(rng, streams):
    gains = tuple(float(10 ** rng.uniform(0.0, 3.0)) for _ in range(streams))
    return opt.FractionalProblem(
        gains=gains, eta=float(rng.uniform(0.05, 0.6)),
        p_circ_w=float(10 ** rng.uniform(-0.3, 1.5)), alpha_oh=0.9,
        bandwidth_hz=20e6, p_min_w=0.0, p_max_w=float(10 ** rng.uniform(-0.5, 1.5)))


def grid_search(prob, points=10**6):
    lo = prob.p_min_w if prob.p_min_w > 0 else prob.p_max_w * 1e-9
    p = np.geomspace(lo, prob.p_max_w, points)
    num = sum(np.log1p(c * p) for c in prob.gains) * prob.rate_factor()
    f = num / (prob.m_act * p / prob.eta + prob.p_circ_w) / math.log(2)
    k = int(np.argmax(f))
    return float(p[k]), float(f[k])


def test_objective_zero_power():
    assert opt.objective_f(0.0, simo_problem()) == 0.0


def test_objective_unit_case():
    # c=1, eta=1, P_circ=1, rate factor 1, p=1 -> log2(2)/2
    assert opt.objective_f(1.0, simo_problem()) == pytest.approx(0.5, rel=1e-12)


def test_two_stream_numerator_doubles():
    one = simo_problem(c=3.0)
    two = opt.FractionalProblem(gains=(3.0, 3.0), eta=1.0, p_circ_w=1.0, alpha_oh=1.0,
                                bandwidth_hz=1.0, p_min_w=0.0, p_max_w=10.0)
    assert two.numerator(0.7) == pytest.approx(2 * one.numerator(0.7), rel=1e-12)


def test_auxiliary_update_constructed_case():
    # A(p) = 4 ln(1+p) equals 4 at p = e-1; B there equals 2
    prob = simo_problem(c=1.0, eta=1.0, p_circ=3.0 - math.e, alpha=1.0, bw=4.0)
    p = math.e - 1.0
    assert prob.numerator(p) == pytest.approx(4.0, rel=1e-12)
    assert prob.denominator(p) == pytest.approx(2.0, rel=1e-12)
    assert opt.y_update(p, prob) == pytest.approx(1.0, rel=1e-12)


def test_auxiliary_update_zero_at_zero_power():
    assert opt.y_update(0.0, simo_problem()) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.99))
def test_transform_recovers_ratio(seed, frac):
    # completing the square: the optimal auxiliary value attains A/B exactly
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, 1 + seed % 2)
    p = frac * prob.p_max_w
    f_nat = prob.numerator(p) / prob.denominator(p)
    y_star = opt.y_update(p, prob)
    assert opt.quadratic_transform(p, y_star, prob) == pytest.approx(
        f_nat, rel=1e-12, abs=1e-15)
    for y in (0.5 * y_star, 2.0 * y_star + 1e-9):
        assert opt.quadratic_transform(p, y, prob) <= f_nat + 1e-12 * abs(f_nat)


def test_transform_equivalence_across_instances():
    rng = np.random.default_rng(11)
    for i in range(100):
        prob = random_problem(rng, 1 + i % 2)
        for p in rng.uniform(0.0, prob.p_max_w, size=20):
            f_nat = prob.numerator(p) / prob.denominator(p)
            g = opt.quadratic_transform(p, opt.y_update(p, prob), prob)
            assert g == pytest.approx(f_nat, rel=1e-12, abs=1e-15)


def test_power_update_boundary_cases():
    prob = simo_problem(c=5.0, eta=0.5, p_circ=2.0, p_min=0.5, p_max=4.0)
    assert opt.p_update(1e12, prob) == prob.p_min_w
    assert opt.p_update(1e-12, prob) == prob.p_max_w
    assert opt.p_update(0.0, prob) == prob.p_max_w


def test_power_update_satisfies_first_order_condition():
    prob = simo_problem(c=50.0, eta=0.3, p_circ=8.0, alpha=0.9, bw=20e6, p_max=6.0)
    p_star = 2.0
    y = opt.y_update(p_star, prob)
    p_hat = opt.p_update(y, prob)
    c = prob.gains[0]
    ab = prob.rate_factor()
    lhs = c * math.sqrt(ab) / ((1 + c * p_hat) * math.sqrt(math.log1p(c * p_hat)))
    assert abs(lhs - y / prob.eta) < 1e-8 * (y / prob.eta)


def test_first_order_condition_strictly_decreasing():
    prob = simo_problem(c=120.0, eta=0.25, p_circ=9.0, alpha=0.9, bw=20e6, p_max=5.0)
    y = 0.7 * opt.y_update(2.0, prob)
    p = np.linspace(1e-6, prob.p_max_w, 1000)
    lhs = prob.rate_factor() * prob.gains[0] / (1 + prob.gains[0] * p) \
        - y / prob.eta * np.sqrt(prob.rate_factor() * np.log1p(prob.gains[0] * p))
    assert np.all(np.diff(lhs) < 0)


def test_iteration_matches_grid_search_quickly():
    rng = np.random.default_rng(42)
    for _ in range(10):
        prob = random_problem(rng, 1 + _ % 2)
        sol = opt.maximize_ee(prob)
        p_ref, f_ref = grid_search(prob, points=10**5)
        assert sol.p_star_w == pytest.approx(p_ref, rel=1e-3)
        assert sol.ee_bits_per_joule == pytest.approx(f_ref, rel=1e-3)


def test_trace_monotone_and_converged():
    rng = np.random.default_rng(7)
    prob = random_problem(rng, 2)
    sol = opt.maximize_ee(prob)
    values = [f for _, _, f in sol.trace]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert sol.iterations <= 100
    assert sol.y_star == pytest.approx(opt.y_update(sol.p_star_w, prob), rel=1e-12)


def test_vanishing_gain_limit():
    prob = simo_problem(c=1e-12, eta=0.4, p_circ=5.0, alpha=0.9, bw=20e6, p_max=2.0)
    sol = opt.maximize_ee(prob)
    assert sol.ee_bits_per_joule < 1e-4
    assert opt.objective_f(sol.p_star_w, prob) <= opt.objective_f(prob.p_max_w, prob)


def test_nonconvergence_error_carries_trace():
    prob = simo_problem(c=100.0, eta=0.3, p_circ=5.0, alpha=0.9, bw=20e6, p_max=3.0)
    with pytest.raises(opt.NonconvergenceError) as err:
        opt.maximize_ee(prob, max_iter=0)
    assert len(err.value.trace) == 1


def test_problem_validation():
    with pytest.raises(ValueError):
        simo_problem(c=-1.0)
    with pytest.raises(ValueError):
        simo_problem(eta=0.0)
    with pytest.raises(ValueError):
        simo_problem(p_circ=0.0)
    with pytest.raises(ValueError):
        simo_problem(p_min=5.0, p_max=1.0)
    with pytest.raises(ValueError):
        opt.maximize_ee(simo_problem(), p0=100.0)


def test_solve_mode_reports_consistent_quantities():
    res = opt.solve_mode(opt.SWITCH_DFT, GAINS, CFG, BMIN)
    assert res.mode == opt.SWITCH_DFT
    assert res.inner in (lb.SIMO_DFT, lb.MIMO_CP)
    expected_ee = CFG.overhead_factor * CFG.bandwidth_hz * res.se_bits_hz / res.p_ru_w
    assert res.ee_bits_per_joule == pytest.approx(expected_ee, rel=1e-9)
    values = [f for _, _, f in res.trace]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_solve_mode_rejects_unmeetable_target():
    with pytest.raises(opt.ConstraintConflictError):
        opt.solve_mode(opt.FULL_MIMO, GAINS, CFG, BMIN, se_target=25.0)


def test_minimum_backoff_beats_larger_backoffs():
    # grid validation of running each option at its smallest compliant backoff
    for mode in opt.MODES:
        base = opt.solve_mode(mode, GAINS, CFG, BMIN)
        gridded = opt.solve_mode(mode, GAINS, CFG, BMIN, backoff_grid_db=3.0)
        assert gridded.b_db == pytest.approx(base.b_db)
        assert gridded.ee_bits_per_joule == pytest.approx(base.ee_bits_per_joule,
                                                          rel=1e-12)


def test_solve_mode_unknown_mode():
    with pytest.raises(ValueError):
        opt.solve_mode("Always-SIMO", GAINS, CFG, BMIN)


def test_sweep_selects_single_stream_then_two_streams():
    cells = {c.se_bits_hz: c for c in
             opt.sweep_modes(CFG, [1.0, 9.5], GAINS, BMIN) if c.mode == opt.SWITCH_DFT}
    assert cells[1.0].inner == lb.SIMO_DFT
    assert cells[9.5].inner == lb.MIMO_CP


def test_sweep_marks_infeasible_cells():
    cells = [c for c in opt.sweep_modes(CFG, [30.0], GAINS, BMIN)]
    assert all(not c.feasible for c in cells)
    assert all(math.isnan(c.p_ru_w) for c in cells)


def test_sweep_efficiency_consistent_with_power():
    for c in opt.sweep_modes(CFG, [2.0, 6.0], GAINS, BMIN):
        if c.feasible:
            assert c.ee_bits_per_joule == pytest.approx(
                CFG.overhead_factor * CFG.bandwidth_hz * c.se_bits_hz / c.p_ru_w,
                rel=1e-12)
