import itertools
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from adinvest import (ActionTriple, StationaryPolicy, SystemSpec, closed_form_site,
                      compute_optimal, consumption_rate, derive_bounds, error_bounds,
                      evaluate_policy, full_grid_optimal, revenue_rate, verify_bounds)
from adinvest.errors import DegenerateFrameError

from conftest import random_system

G1_5_02 = math.sqrt(25) * 0.2**0.2


def _idx(site, p, t, m):
    return site.actions.index(ActionTriple(p, t, m))


def lp_optimum(spec, b):
    """Independent LP over per-site time fractions z (sum_h z = 1)."""
    c, a_ub, sizes = [], [], []
    for s in spec.sites:
        L = s.f_array + s.freeze_array
        c.extend(-(s.g_array / L))
        a_ub.extend(s.p_array / L)
        sizes.append(len(s.actions))
    n = len(c)
    eq = np.zeros((len(sizes), n))
    off = 0
    for k, size in enumerate(sizes):
        eq[k, off:off + size] = 1.0
        off += size
    res = linprog(c, A_ub=[a_ub], b_ub=[b], A_eq=eq, b_eq=np.ones(len(sizes)),
                  bounds=[(0, None)] * n, method="highs")
    assert res.status == 0
    return -res.fun


def test_profit_star_closed_form(ref):
    # both sites spend at rate 0.1: site 1 on (5,0,0.1) with F=50, site 2 on (5,0,0.2) with F=50
    s1, s2 = ref.sites
    pol = StationaryPolicy.pure(ref, [_idx(s1, 5, 0, 0.1), _idx(s2, 5, 0, 0.2)])
    profit, spend = evaluate_policy(pol, ref)
    assert spend == pytest.approx(0.2)
    assert profit == pytest.approx(math.sqrt(50) * 0.1**0.2 / 50 + 2 * math.sqrt(25) * 0.2**0.2 / 50)
    assert profit == pytest.approx(0.23418677611981933, rel=1e-12)


def test_evaluate_policy_examples(ref):
    s1, s2 = ref.sites
    pol = StationaryPolicy.pure(ref, [_idx(s1, 5, 0, 0.2), _idx(s2, 0, 5, 0.1)])
    profit, spend = evaluate_policy(pol, ref)
    assert profit == pytest.approx(G1_5_02 / 25, rel=1e-12)
    assert profit == pytest.approx(0.14496, rel=1e-4)
    assert spend == pytest.approx(0.2)

    zero = StationaryPolicy.pure(ref, [_idx(s1, 0, 5, 0.1), _idx(s2, 0, 5, 0.2)])
    assert evaluate_policy(zero, ref) == (0.0, 0.0)

    w = np.zeros(len(s1.actions))
    w[_idx(s1, 5, 0, 0.2)] = w[_idx(s1, 0, 5, 0.2)] = 0.5
    mixed = StationaryPolicy((w, zero.weights[1]))
    profit, spend = evaluate_policy(mixed, ref)
    assert profit == pytest.approx(0.5 * G1_5_02 / 15, rel=1e-12)
    assert profit == pytest.approx(0.12080, rel=1e-4)
    assert spend == pytest.approx(2.5 / 15)
    # ratio of expectations, not expectation of ratios
    assert profit != pytest.approx(0.5 * G1_5_02 / 25)


def test_policy_validation(ref):
    with pytest.raises(ValueError):
        StationaryPolicy((np.array([0.5, 0.6]),))
    with pytest.raises(ValueError):
        StationaryPolicy((np.array([-0.1, 1.1]),))


def test_evaluate_degenerate():
    site = closed_form_site(1, 1, 1, 0.2, [ActionTriple(0, 0, 0.1), ActionTriple(5, 0, 0.1)])
    spec = SystemSpec((site,), 0.2, 1)
    with pytest.raises(DegenerateFrameError):
        evaluate_policy(StationaryPolicy.pure(spec, [0]), spec)


def test_point_mass_matches_controller_rates(ref):
    for pos, site in enumerate(ref.sites):
        for i, a in enumerate(site.actions):
            idx = [0] * len(ref.sites)
            idx[pos] = i
            profit, spend = evaluate_policy(StationaryPolicy.pure(ref, idx), ref)
            other = ref.sites[1 - pos].actions[0]  # (0,5,0.1): contributes nothing
            assert other.p == 0
            assert profit == pytest.approx(revenue_rate(site, a), rel=1e-12)
            assert spend == pytest.approx(consumption_rate(site, a), rel=1e-12)


@pytest.fixture(scope="module")
def ref_opt(ref):
    return compute_optimal(ref)


def test_reference_optimum(ref, ref_opt):
    assert ref_opt.profit == pytest.approx(0.23418677611981933, rel=1e-12)
    assert ref_opt.expenditure <= 0.2 + 1e-9
    assert evaluate_policy(ref_opt.policy, ref) == pytest.approx(
        (ref_opt.profit, ref_opt.expenditure))
    assert ref_opt.dual_bound >= ref_opt.profit - 1e-12
    assert ref_opt.dual_bound == pytest.approx(ref_opt.profit, abs=1e-6)


def test_reference_optimum_matches_grid_and_lp(ref, ref_opt):
    grid, spend = full_grid_optimal(ref)
    assert abs(grid - ref_opt.profit) <= 1e-3
    assert spend <= 0.2 + 1e-9
    assert ref_opt.profit == pytest.approx(lp_optimum(ref, 0.2), abs=1e-9)


def test_scaled_budget_optimum(ref):
    b = 0.2 / 1.1
    res = compute_optimal(ref, b)
    assert res.profit == pytest.approx(0.21796298641358658, rel=1e-9)
    assert res.profit == pytest.approx(lp_optimum(ref, b), abs=1e-9)
    assert res.expenditure <= b + 1e-9
    assert res.mixing_site is not None
    grid, _ = full_grid_optimal(ref, b)
    assert abs(grid - res.profit) <= 1e-3


def test_dominates_every_pure_policy(ref, ref_opt):
    best = 0.0
    for combo in itertools.product(*(range(len(s.actions)) for s in ref.sites)):
        profit, spend = evaluate_policy(StationaryPolicy.pure(ref, combo), ref)
        if spend <= 0.2 + 1e-12:
            best = max(best, profit)
            assert ref_opt.profit >= profit - 1e-12
    assert best == pytest.approx(ref_opt.profit)


def test_single_site_single_action():
    site = closed_form_site(1, 1, 1, 0.2, [ActionTriple(0, 5, 0.1), ActionTriple(5, 0, 0.1)])
    spec = SystemSpec((site,), 1.0, 1)
    res = compute_optimal(spec)
    assert res.profit == pytest.approx(math.sqrt(50) * 0.1**0.2 / 50, rel=1e-12)
    assert res.policy.weights[0].tolist() == [0.0, 1.0]


def test_zero_budget(ref):
    res = compute_optimal(ref, 0.0)
    assert res.profit == 0.0 and res.expenditure == 0.0
    assert full_grid_optimal(ref, 0.0)[0] == 0.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_systems_match_lp(seed):
    spec = random_system(np.random.default_rng(seed))
    res = compute_optimal(spec)
    lp = lp_optimum(spec, spec.b_av)
    assert res.expenditure <= spec.b_av + 1e-9
    assert res.profit == pytest.approx(lp, rel=1e-7, abs=1e-9)
    assert res.dual_bound >= res.profit - 1e-9


def _metrics(profits, spend=0.2, max_q=10.0):
    return [SimpleNamespace(profit_av=p, expenditure_av=spend, max_q=max_q) for p in profits]


def test_verify_bounds_pass_and_fail(ref):
    b = derive_bounds(ref)
    star = 0.23418677611981933
    ok = verify_bounds(star, _metrics([star - 1e-4, star + 1e-4, star]), b, 200)
    assert ok.ok and ok.violations == []
    high = verify_bounds(star, _metrics([star + 0.01, star + 0.0101, star + 0.0099]), b, 200)
    assert [c.name for c in high.violations] == ["profit_upper"]
    spendy = verify_bounds(star, _metrics([star] * 3, spend=0.21), b, 200)
    assert [c.name for c in spendy.violations] == ["budget"]
    qbad = verify_bounds(star, _metrics([star] * 3, max_q=1e6), b, 200)
    assert [c.name for c in qbad.violations] == ["queue_bound"]
    assert qbad.violations[0].margin < 0


def test_verify_bounds_gap_not_asserted(ref):
    b = derive_bounds(ref)
    star = 0.23418677611981933
    rep = verify_bounds(star, _metrics([0.9 * star] * 3), b, 200)
    gap = next(c for c in rep.checks if c.name == "gap_within_5pct")
    assert not gap.ok and not gap.asserted
    assert rep.ok  # lower bound at v=200 is far below 0.9 profit*


def test_verify_bounds_estimation_mode(ref):
    b = derive_bounds(ref.with_budget(0.2 / 1.1))
    eb = error_bounds(b, 200, 0.05, 0.1, 2)
    star = 0.21796298641358658
    rep = verify_bounds(star, _metrics([0.2] * 3, spend=0.2), b, 200, error_bounds=eb,
                        budget_slack=0.0, b_av=0.2)
    assert rep.ok
    assert "profit_upper" not in [c.name for c in rep.checks]
    # with rho_g = 0 and large v only the (1-rho_f)/(1+rho_f) factor remains
    big = error_bounds(b, 1e9, 0.0, 0.1, 2)
    assert big.lower_bound(star) == pytest.approx(0.9 / 1.1 * star, abs=1e-2)
    low = verify_bounds(star, _metrics([0.1] * 3, spend=0.15), b, 1e9, error_bounds=big)
    assert [c.name for c in low.violations] == ["profit_lower"]
