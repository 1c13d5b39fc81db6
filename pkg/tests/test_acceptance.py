"""Exit criteria, one test each, run at the stated sizes and tolerances.

Every test records a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import csv
import math
import random
import time

import numpy as np
import pytest
from scipy import integrate, stats

from noisymh.core import RngStream, geometric_target, integer_walk, run_chain
from noisymh.diagnostics import TvRateParams, empirical_tv, tv_rate_bound
from noisymh.discrete_walk import classify
from noisymh.experiments import RUN_PRESETS, run_experiment
from noisymh.hmm_smc import LgssmParams, kalman_loglik
from noisymh.kernels import Kernel
from noisymh.lemmas import check_lemmas
from noisymh.presets import discrete_preset, enumerable_presets, lognormal_example
from noisymh.verify import drift_simulation, noisy_tv_curve, smc_unbiasedness, verify_ratio_ordering_report
from noisymh.weights import HomogeneousLogNormal, UnitWeights, negative_moment

pytestmark = pytest.mark.acceptance


def four_atom_up(theta, b, eps):
    """Independent oracle: noisy up-move probability by explicit 2 x 2 enumeration."""
    s = (1 - eps) / (b - eps)
    atoms = [(b, s), (eps, 1 - s)]
    return theta * sum(pu * pw * min(1.0, 0.5 * (1 - theta) / theta * u / w) for u, pu in atoms for w, pw in atoms)


def test_criterion_01_unit_weight_collapse(record_criterion):
    t0 = time.perf_counter()
    target, walk = geometric_target(), integer_walk(0.5)
    runs = [run_chain(Kernel(kind, target, walk, UnitWeights()), 5, 10**4, RngStream(7))
            for kind in ("marginal", "noisy", "pseudo_marginal")]
    same = all(np.array_equal(r.states, runs[0].states) for r in runs[1:])
    elapsed = time.perf_counter() - t0
    ok = same and elapsed < 1.0
    assert record_criterion(1, ok, f"identical sequences {same}, {elapsed:.2f} s")


def test_criterion_02_marginal_baseline(record_criterion):
    kernel = discrete_preset("marginal").kernel("marginal")
    trace = run_chain(kernel, 1, 10**6, RngStream(7))
    tv = empirical_tv(trace, kernel.target, burnin=10**4)
    assert record_criterion(2, tv < 0.01, f"TV {tv:.5f} < 0.01")


def test_criterion_03_homogeneous_transience(record_criterion):
    preset = discrete_preset("fig7-left")
    chain = preset.birth_death()
    p, q = chain.table(30_000)
    eps = 2 - math.sqrt(3)
    oracle = four_atom_up(0.75, 6 * eps, eps)
    p_err = float(np.max(np.abs(p[1:] - oracle)))
    q_err = float(np.max(np.abs(q[1:] - 0.25)))
    verdict = classify(chain).verdict
    sim = drift_simulation("fig7-left")
    ok = p_err < 1e-9 and q_err < 1e-9 and oracle > 0.25 and verdict == "transient" and sim["median_final"] > 100
    assert record_criterion(3, ok, f"p={oracle:.6f} (err {p_err:.1e}), q=0.25 (err {q_err:.1e}), {verdict}, "
                                   f"median state at 1e4 steps {sim['median_final']:.0f} (> 100 needed)")


def test_criterion_04_cyclic_transience(record_criterion):
    cls = classify(discrete_preset("prop3").birth_death(), M=30_000)
    inc = cls.evidence["S_rec"]["cauchy_increment"]
    sim = drift_simulation("prop3")
    ok = inc < 1e-12 and cls.verdict == "transient" and sim["median_final"] > 100
    assert record_criterion(4, ok, f"increment {inc:.1e}, {cls.verdict}, median state {sim['median_final']:.0f}")


def _binomial_family(eps_kind):
    preset = discrete_preset("prop6" if eps_kind == "reciprocal" else "prop7")
    out = {}
    for N in (1, 2, 5):
        cls = classify(preset.birth_death(N), M=30_000)
        out[N] = (cls.verdict, min(cls.evidence["lim_q"]) - max(cls.evidence["lim_p"]))
    return out


def test_criterion_05_reciprocal_eps_ergodic(record_criterion):
    res = _binomial_family("reciprocal")
    ok = all(v == "geometrically-ergodic" and gap > 0.05 for v, gap in res.values())
    assert record_criterion(5, ok, ", ".join(f"N={N}: {v} gap {g:.3f}" for N, (v, g) in res.items()))


def test_criterion_06_cyclic_eps_transient(record_criterion):
    res = _binomial_family("cyclic")
    ok = all(v == "transient" for v, _ in res.values())
    assert record_criterion(6, ok, ", ".join(f"N={N}: {v}" for N, (v, _) in res.items()))


def test_criterion_07_lognormal_ergodic(record_criterion):
    rep = verify_ratio_ordering_report(seed=7, draws=10**6)
    ev = rep.evidence
    z = ev["difference"] / ev["stderr"]
    verdict = ev["classification"]["verdict"]
    ok = z >= 5 and verdict == "geometrically-ergodic"
    assert record_criterion(7, ok, f"difference {ev['difference']:.4f} at {z:.0f} SE, {verdict}")


def test_criterion_08_lemma_suite(record_criterion):
    rep = check_lemmas(enumerable_presets(), grid=range(1, 201), levels=(0.1, 0.5, 1.0), slack=1e-12)
    total = sum(rep.checks.values())
    assert record_criterion(8, rep.passed, f"{total} inequalities, {len(rep.violations)} violations")


def test_criterion_09_negative_moments(record_criterion):
    exact_ok = True
    for preset in enumerable_presets():
        for m in (1, 2, 3, 10, 57):
            for power in (0.5, 1.0, 2.0):
                vals = [negative_moment(preset.weights, m, N, power).value for N in range(1, 11)]
                exact_ok &= all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    gen = RngStream(7).generator("negative-moments")
    w = HomogeneousLogNormal(5.0)
    draws = {1: 10**7, 10: 10**6, 100: 10**5, 1000: 10**5}
    est = {N: negative_moment(w, 0.0, N, 1.0, mode="mc", draws=d, gen=gen).value for N, d in draws.items()}
    seq = [est[N] for N in draws]
    decreasing = all(a > b for a, b in zip(seq, seq[1:]))
    near_e5 = abs(est[1] / math.exp(5) - 1) < 0.02
    small_at_1000 = est[1000] < 1.05
    ok = exact_ok and decreasing and near_e5 and small_at_1000
    assert record_criterion(9, ok, f"exact monotone {exact_ok}; MC " + ", ".join(f"N={N}: {v:.4f}" for N, v in est.items())
                            + f"; N=1000 below 1.05: {small_at_1000}")


def test_criterion_10_pseudo_marginal_exact(record_criterion):
    kernel = lognormal_example(10, "pseudo_marginal")
    trace = run_chain(kernel, 0.0, 2 * 10**5, RngStream(7))
    x = trace.component(0)
    mean, var = float(x.mean()), float(x.var())
    tv = empirical_tv(trace, kernel.target)
    ok = -0.05 < mean < 0.05 and 0.9 < var < 1.1 and tv < 0.03
    assert record_criterion(10, ok, f"mean {mean:.4f}, variance {var:.4f}, TV {tv:.4f}")


def test_criterion_11_noisy_tv_decreasing(record_criterion):
    wins, rows = 0, []
    for seed in (7, 8, 9):
        tv = noisy_tv_curve((10, 100, 1000), 10**5, seed=seed)
        vals = [tv[N] for N in (10, 100, 1000)]
        wins += all(a > b for a, b in zip(vals, vals[1:]))
        rows.append("/".join(f"{v:.4f}" for v in vals))
    assert record_criterion(11, wins >= 2, f"{wins}/3 seeds decreasing (TV {'; '.join(rows)})")


def _grid_loglik(params, y, half_width=12.0, points=4001):
    grid = np.linspace(-half_width, half_width, points)
    dens = stats.norm.pdf(grid, params.a * params.x0, math.sqrt(params.sx2))
    total = 0.0
    for t, obs in enumerate(y):
        if t > 0:
            kernel = stats.norm.pdf(grid[:, None], params.a * grid[None, :], math.sqrt(params.sx2))
            dens = integrate.trapezoid(kernel * dens[None, :], grid, axis=1)
        joint = dens * stats.norm.pdf(obs, grid, math.sqrt(params.sy2))
        lik = integrate.trapezoid(joint, grid)
        total += math.log(lik)
        dens = joint / lik
    return total


def test_criterion_12_smc_unbiased(record_criterion):
    ev = smc_unbiasedness(T=20, N=50, replicates=1000, seed=7, params=LgssmParams(0.0, 0.9, 1.0, 1.0))
    unbiased = abs(ev["mean_ratio"] - 1) <= 3 * ev["stderr"]
    params, y = LgssmParams(0.0, 0.9, 1.0, 1.0), [0.4, -0.2, 1.1]
    gap = abs(kalman_loglik(params, y) - _grid_loglik(params, y))
    ok = unbiased and gap < 1e-6
    assert record_criterion(12, ok, f"mean ratio {ev['mean_ratio']:.4f} (se {ev['stderr']:.4f}), "
                                    f"Kalman vs quadrature {gap:.1e}")


def _acf_at(path, lag):
    with open(path) as fh:
        for row in csv.DictReader(fh):
            if int(row["lag"]) == lag:
                return float(row["acf"])
    raise KeyError(lag)


def test_criterion_13_pmmh_ordering(record_criterion, tmp_path):
    cfg = dict(RUN_PRESETS["pmmh"], kernels=["pseudo_marginal", "noisy"], preset="pmmh")
    report = run_experiment(cfg, tmp_path)
    acc = {(r["kernel"], r["seed"]): r["acceptance"] for r in report["summary"]}
    acc_wins = acf_wins = 0
    rows = []
    for seed in cfg["seeds"]:
        acf = {k: _acf_at(tmp_path / f"acf_{k}_N100_seed{seed}.csv", 50) for k in ("pseudo_marginal", "noisy")}
        acc_wins += acc[("noisy", seed)] > acc[("pseudo_marginal", seed)]
        acf_wins += acf["noisy"] < acf["pseudo_marginal"]
        rows.append(f"seed {seed}: acc {acc[('noisy', seed)]:.3f}/{acc[('pseudo_marginal', seed)]:.3f} "
                    f"acf50 {acf['noisy']:.3f}/{acf['pseudo_marginal']:.3f}")
    ok = acc_wins >= 2 and acf_wins >= 2
    assert record_criterion(13, ok, f"noisy/PM, acceptance {acc_wins}/3, acf {acf_wins}/3; " + "; ".join(rows))


def test_criterion_14_rate_bound(record_criterion):
    rnd = random.Random(7)
    exact = 0
    for _ in range(50):
        R, tau, r = rnd.uniform(0.5, 50), rnd.uniform(0.05, 0.95), 10 ** rnd.uniform(3, 7)
        bound = tv_rate_bound(TvRateParams(R, tau, r))
        brute = min((2 * R * tau**n + n / r, n) for n in range(1, 5001))
        exact += bound.bound == brute[0] and bound.n == brute[1]
    ratios = [tv_rate_bound(TvRateParams(3.0, 0.7, r)).bound / (math.log(r) / r) for r in (1e2, 1e4, 1e6)]
    ok = exact == 50 and max(ratios) < 10
    assert record_criterion(14, ok, f"{exact}/50 exact, bound / (log r / r) = "
                                    + ", ".join(f"{v:.3f}" for v in ratios))
