import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adinvest import (EstimatedModel, EstimationConfig, QualityIndex, QualityUndefinedError,
                      derive_bounds, error_bounds, perturb_model, run, scaled_budget,
                      verify_quality)
from adinvest.errors import ConfigError

from conftest import random_system


def test_perturb_plus(ref):
    est = perturb_model(ref, 0.05, 0.1, "plus")
    f_hat, g_hat = est.tables(ref.sites[0])
    i = ref.sites[0].actions.index(next(a for a in ref.sites[0].actions
                                          if (a.p, a.t_freeze, a.m) == (5, 0, 0.1)))
    assert f_hat[i] == pytest.approx(55.0)
    assert g_hat[i] == pytest.approx(1.05 * ref.sites[0].g_values[i])


def test_perturb_identity(ref):
    est = perturb_model(ref, 0.0, 0.0, "minus")
    for s in ref.sites:
        f, g = est.tables(s)
        assert np.array_equal(f, s.f_array) and np.array_equal(g, s.g_array)


def test_zero_investment_untouched(ref):
    site = ref.sites[1]
    n = len(site.actions)
    factors = {s.id: [(0.9, 1.05)] * n for s in ref.sites}
    est = perturb_model(ref, 0.05, 0.1, "per_action", factors)
    f, g = est.tables(site)
    zero = site.p_array == 0
    assert np.all(g[zero] == 0) and np.all(f[zero] == 0)


def test_factor_out_of_range(ref):
    factors = {s.id: [(1.2, 1.0)] * len(s.actions) for s in ref.sites}
    with pytest.raises(ValueError):
        perturb_model(ref, 0.05, 0.1, "per_action", factors)


def test_verify_quality(ref):
    q = verify_quality(ref, perturb_model(ref, 0.05, 0.1, "plus"))
    assert q.rho_g == pytest.approx(0.05) and q.rho_f == pytest.approx(0.1)
    q0 = verify_quality(ref, EstimatedModel.exact(ref))
    assert (q0.rho_g, q0.rho_f) == (0.0, 0.0)


def test_verify_quality_undefined(ref):
    est = EstimatedModel.exact(ref)
    est.g[ref.sites[0].id][3] *= 2.0
    with pytest.raises(QualityUndefinedError):
        verify_quality(ref, est)
    est = EstimatedModel.exact(ref)
    est.g[ref.sites[0].id][0] = 0.5  # nonzero where true G is zero
    with pytest.raises(QualityUndefinedError):
        verify_quality(ref, est)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rg=st.floats(0, 0.95), rf=st.floats(0, 0.95),
       fseed=st.integers(0, 2**32 - 1))
def test_quality_of_perturbation_within_bounds(seed, rg, rf, fseed):
    spec = random_system(np.random.default_rng(seed))
    frng = np.random.default_rng(fseed)
    factors = {s.id: np.column_stack([frng.uniform(1 - rf, 1 + rf, len(s.actions)),
                                      frng.uniform(1 - rg, 1 + rg, len(s.actions))])
               for s in spec.sites}
    q = verify_quality(spec, perturb_model(spec, rg, rf, "per_action", factors))
    assert q.rho_g <= rg + 1e-12 and q.rho_f <= rf + 1e-12


def test_quality_index_range():
    with pytest.raises(ValueError):
        QualityIndex(1.0, 0.0)
    with pytest.raises(ValueError):
        QualityIndex(0.0, -0.1)


@pytest.mark.parametrize("b, rho, expected", [
    (0.2, 0.1, 0.2 / 1.1),
    (0.2, 0.0, 0.2),
    (1.0, 0.5, 2 / 3),
])
def test_scaled_budget(b, rho, expected):
    assert scaled_budget(b, rho) == pytest.approx(expected)


def test_error_bounds_reduce_to_exact(ref):
    b = derive_bounds(ref)
    eb = error_bounds(b, 50, 0.0, 0.0, 2)
    assert eb.revenue_factor == 1.0
    assert eb.c_max_hat == pytest.approx(b.c_max)
    assert eb.queue_bound == pytest.approx(b.queue_bound(50))
    assert eb.c2 == pytest.approx(b.c0)
    assert eb.penalty == 0.0


def test_error_bounds_values(ref):
    b = derive_bounds(ref)
    eb = error_bounds(b, 200, 0.05, 0.1, 2)
    assert eb.revenue_factor == pytest.approx(0.9 / (1.1 * 1.05))
    assert eb.revenue_factor == pytest.approx(0.77922, rel=1e-5)
    assert eb.c_max_hat == pytest.approx(1.1 * 245 * 2 * 10 / (0.9 * 5))
    assert eb.c_max_hat == pytest.approx(1197.8, rel=1e-4)
    assert eb.c3 == pytest.approx(2 * 2 * 245 * eb.c_max_hat * 10 / (0.9 * 5))
    assert eb.queue_bound == pytest.approx(200 * 1.05 * b.nu + 2 * eb.c_max_hat)
    assert eb.penalty == pytest.approx(2 * 0.05 * b.g_max / (1.05 * 5))


def test_config_roundtrip():
    cfg = EstimationConfig.from_dict({"rho_g": 0.05, "rho_f": 0.1, "mode": "minus"})
    assert EstimationConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        EstimationConfig.from_dict({"rho_g": 0.05, "rho_f": 0.1, "mode": "sideways"})
    with pytest.raises(ConfigError):
        EstimationConfig.from_dict({"rho_f": 0.1})


def test_zero_error_matches_exact_run(ref):
    t_exact, _ = run(ref, 5e3, seed=5)
    est = perturb_model(ref, 0.0, 0.0)
    t_est, _ = run(ref, 5e3, seed=5, model=est, budget=scaled_budget(ref.b_av, 0.0))
    assert t_exact.to_csv() == t_est.to_csv()


def test_estimated_queue_uses_estimates(ref):
    est = perturb_model(ref, 0.05, 0.1, "plus")
    trace, _ = run(ref, 5e3, seed=5, model=est, budget=scaled_budget(ref.b_av, 0.1))
    for rec in trace.records[:200]:
        a_hat = 0.0
        for pos, site in enumerate(ref.sites):
            i = rec.in_effect[pos]
            f_hat, _ = est.tables(site)
            a_hat += site.actions[i].p / (f_hat[i] + site.actions[i].t_freeze)
        assert rec.A == pytest.approx(rec.delta * a_hat, rel=1e-12)
        assert rec.mu == pytest.approx(rec.delta * 0.2 / 1.1, rel=1e-12)
    # frames still come from the true model: durations lie in the true support
    for fr in trace.frames:
        site = ref.site(fr.site)
        f = site.f_values[fr.index]
        assert 0.8 * f - 1e-9 <= fr.t_ad <= 1.2 * f + 1e-9
