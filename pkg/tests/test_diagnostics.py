import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisymh.core import ChainTrace, RngStream, gaussian_target, geometric_target, run_chain
from noisymh.diagnostics import (
    Binning,
    InconclusiveBoundError,
    TvRateParams,
    acf,
    batch_means_se,
    continuous_minimiser,
    drift_ratio,
    empirical_tv,
    mean_acceptance,
    rate_bound_closed_form,
    rate_objective,
    tv_rate_bound,
)
from noisymh.presets import discrete_preset, lognormal_example

P_UP = 0.25408650880638817


def test_acf_iid_and_ar1(gen):
    iid = gen.standard_normal(100_000)
    vals = acf(iid, 5).values
    assert vals[0] == 1.0
    assert np.all(np.abs(vals[1:]) < 0.02)
    ar = np.empty(100_000)
    ar[0] = 0.0
    noise = gen.standard_normal(100_000)
    for t in range(1, len(ar)):
        ar[t] = 0.8 * ar[t - 1] + noise[t]
    vals = acf(ar, 3).values
    np.testing.assert_allclose(vals[1:], [0.8, 0.64, 0.512], atol=0.02)


def test_acf_matches_direct_sum(gen):
    x = gen.standard_normal(300)
    c = x - x.mean()
    direct = [np.dot(c[: len(c) - k], c[k:]) / np.dot(c, c) for k in range(6)]
    np.testing.assert_allclose(acf(x, 5).values, direct, atol=1e-12)


def test_acf_constant_and_short():
    res = acf(np.full(50, 3.0), 4)
    assert res.degenerate and np.all(res.values == 1.0)
    with pytest.raises(ValueError):
        acf(np.arange(5.0), 5)


def test_mean_acceptance_and_batch_se():
    assert mean_acceptance(np.array([True, False, True, True])) == 0.75
    with pytest.raises(ValueError):
        mean_acceptance(np.array([], dtype=bool))
    assert batch_means_se(np.ones(1000)) == 0.0


def test_tv_discrete_iid_draw(gen):
    draws = gen.geometric(0.5, 10**6)
    assert empirical_tv(draws, geometric_target()) < 0.005


def test_tv_point_mass():
    assert empirical_tv(np.ones(1000, dtype=int), geometric_target()) == pytest.approx(0.5)


def test_tv_normal_iid(gen):
    assert empirical_tv(gen.standard_normal(10**6), gaussian_target(1)) < 0.005
    assert empirical_tv(np.full(100, 100.0), gaussian_target(1), binning=Binning(10)) == pytest.approx(1.0, abs=1e-4)


def test_tv_on_chain_trace_with_burnin():
    tr = ChainTrace(np.array([50, 1, 1, 2]), np.ones(3, bool))
    assert empirical_tv(tr, geometric_target(), burnin=1) == pytest.approx(
        0.5 * (abs(2 / 3 - 0.5) + abs(1 / 3 - 0.25) + 0.25))


def test_drift_ratio_exact_values():
    noisy = discrete_preset("fig7-left").kernel()
    marg = discrete_preset("marginal").kernel("marginal")
    # hand sums: p * 4/3 + q * 3/4 + rest, and 1/4 sqrt2 + 1/2 / sqrt2 + 1/4
    for m in (2, 5, 20):
        assert drift_ratio(noisy, lambda k: (4 / 3) ** k, m) == pytest.approx(
            P_UP * 4 / 3 + 0.25 * 0.75 + (1 - P_UP - 0.25), abs=1e-12)
        assert drift_ratio(marg, lambda k: 2 ** (k / 2), m) == pytest.approx(0.25 * math.sqrt(2) + 0.5 / math.sqrt(2) + 0.25)


def test_drift_ratio_mc_agrees_with_exact():
    kernel = discrete_preset("fig7-left").kernel()
    V = lambda k: (4 / 3) ** k  # noqa: E731
    est, se = drift_ratio(kernel, V, 6, mode="mc", draws=20_000, rng=RngStream(3))
    assert abs(est - drift_ratio(kernel, V, 6)) < 4 * se


def test_drift_ratio_constant_function():
    kernel = discrete_preset("prop7").kernel(N=3)
    assert drift_ratio(kernel, lambda k: 1.0, 9) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        drift_ratio(kernel, lambda k: 0.5, 9)


def brute_force(R, tau, r, limit=5_000):
    best = min((2 * R * tau**n + n / r, n) for n in range(1, limit + 1))
    return best


@settings(max_examples=60, deadline=None)
@given(R=st.floats(0.5, 100), tau=st.floats(0.05, 0.95), log_r=st.floats(2, 8))
def test_rate_bound_equals_brute_force(R, tau, log_r):
    r = 10**log_r
    try:
        bound = tv_rate_bound(TvRateParams(R, tau, r))
    except InconclusiveBoundError:
        return
    ref, _ = brute_force(R, tau, r)
    assert bound.bound == ref
    assert bound.bound <= rate_bound_closed_form(R, tau, r) + 1e-15


def test_rate_bound_callable_and_errors():
    params = TvRateParams(2.0, 0.5, lambda N: float(N))
    assert tv_rate_bound(params, 1000).n in (
        math.floor(continuous_minimiser(2.0, 0.5, 1000)), math.ceil(continuous_minimiser(2.0, 0.5, 1000)))
    with pytest.raises(InconclusiveBoundError):
        tv_rate_bound(TvRateParams(1.0, 0.5, 1.0))
    for bad in ((0.0, 0.5, 10), (1.0, 1.0, 10), (1.0, 0.0, 10)):
        with pytest.raises(ValueError):
            TvRateParams(*bad)


def test_rate_bound_shape():
    ratios = [tv_rate_bound(TvRateParams(3.0, 0.7, r)).bound / (math.log(r) / r) for r in (1e2, 1e4, 1e6)]
    assert max(ratios) < 10
    assert rate_objective(3.0, 0.7, 100.0, 1) == pytest.approx(2 * 3.0 * 0.7 + 0.01)


def test_small_tau_limit():
    b = tv_rate_bound(TvRateParams(1.0, 1e-9, 1e4))
    assert b.n == 1 and b.bound == pytest.approx(1e-4, rel=1e-3)


def test_noisy_tv_smaller_for_larger_N():
    tvs = []
    for N in (10, 1000):
        kernel = lognormal_example(N)
        tvs.append(empirical_tv(run_chain(kernel, 0.0, 20_000, RngStream(7, N)), kernel.target))
    assert tvs[0] > tvs[1]
