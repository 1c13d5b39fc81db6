"""Pass/fail reports for each named claim, shared by the CLI and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .core import RngStream, geometric_target, laplace_target, run_chain, split_stream
from .diagnostics import Binning, empirical_tv, one_step_tv
from .discrete_walk import classify, verify_binomial_family, verify_ratio_ordering
from .hmm_smc import LgssmParams, bootstrap_pf_loglik, kalman_loglik, simulate_lgssm
from .lemmas import check_lemmas
from .presets import discrete_preset, lognormal_example
from .weights import HomogeneousLogNormal


@dataclass
class VerifyResult:
    id: str
    passed: bool
    summary: str
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"id": self.id, "passed": self.passed, "summary": self.summary, "evidence": self.evidence}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def drift_simulation(preset_name: str, x0: int = 10, steps: int = 10**4, chains: int = 20,
                     seed: int = 7, kind: str = "noisy") -> dict:
    """Final states of independent chains started at x0."""
    kernel = discrete_preset(preset_name).kernel(kind)
    streams = split_stream(RngStream(seed), chains)
    finals = [int(run_chain(kernel, x0, steps, s).states[-1]) for s in streams]
    return {"x0": x0, "steps": steps, "chains": chains, "seed": seed,
            "median_final": float(np.median(finals)), "finals": finals}


def _transience_report(vid: str, names, seed: int, simulate: bool, threshold: float = 100.0) -> VerifyResult:
    ev, ok = {}, True
    for name in names:
        preset = discrete_preset(name)
        chain = preset.birth_death()
        cls = classify(chain)
        p, q = chain.table(60)
        entry = {"classification": cls.to_json(), "p": p[1:].tolist(), "q": q[1:].tolist()}
        ok &= cls.verdict == "transient"
        if simulate:
            sim = drift_simulation(name, seed=seed)
            entry["simulation"] = sim
            ok &= sim["median_final"] > threshold
        ev[name] = entry
    verdicts = {n: ev[n]["classification"]["verdict"] for n in names}
    return VerifyResult(vid, bool(ok), f"verdicts {verdicts}", ev)


def verify_homogeneous_transience(seed: int = 7, simulate: bool = False) -> VerifyResult:
    res = _transience_report("prop2", ["prop2"], seed, simulate)
    p, q = res.evidence["prop2"]["p"], res.evidence["prop2"]["q"]
    res.passed = res.passed and min(a - b for a, b in zip(p, q)) > 0
    return res


def verify_cyclic_transience(seed: int = 7, simulate: bool = False) -> VerifyResult:
    return _transience_report("prop3", ["prop3", "prop3-theta0.25"], seed, simulate)


def verify_ratio_ordering_report(seed: int = 7, draws: int = 10**6) -> VerifyResult:
    gen = RngStream(seed).generator("prop1")
    rep = verify_ratio_ordering(HomogeneousLogNormal(5.0), geometric_target(0.5), draws=draws, gen=gen)
    d = rep.difference
    return VerifyResult("prop1", rep.passed,
                        f"difference {d.value:.5f} (se {d.stderr:.2e}); verdict {rep.classification.verdict}",
                        rep.to_json())


def proposal_drift_ratio(target, x: float, s: float, step_variance: float) -> float:
    """(qV)(x)/V(x) for V = pi^-s and a 1-d Gaussian walk, by quadrature."""
    sd = math.sqrt(step_variance)
    lpx = target.log_pi(np.array([x]))

    def integrand(u):
        return math.exp(s * (lpx - target.log_pi(np.array([x + u]))) + norm.logpdf(u, scale=sd))

    # split at the kink of |x + u| and integrate each half-line
    return sum(integrate.quad(integrand, lo, hi, limit=200)[0] for lo, hi in ((-np.inf, -x), (-x, np.inf)))


def verify_proposal_drift(s: float = 0.5, scale: float = 1.0, step_variance: float = 4.0) -> VerifyResult:
    """Proposal drift bound qV <= K V for a log-Lipschitz target with V = pi^-s.

    K = E[exp(s L |U|)] for the walk increment U, finite for Gaussian steps.
    """
    L = 1.0 / scale
    sd = math.sqrt(step_variance)
    a = s * L * sd
    K = 2 * math.exp(a * a / 2) * norm.cdf(a)
    grid = np.concatenate([np.linspace(-50, 50, 101), [0.0]])
    target = laplace_target(1, scale)
    ratios = np.array([proposal_drift_ratio(target, x, s, step_variance) for x in grid])
    sup = float(ratios.max())
    passed = bool(np.isfinite(K) and sup <= K + 1e-9)
    return VerifyResult("prop4", passed, f"sup qV/V = {sup:.6f} <= K = {K:.6f}",
                        {"K": K, "sup_ratio": sup, "grid": [float(grid.min()), float(grid.max()), len(grid)],
                         "s": s, "scale": scale, "step_variance": step_variance})


def verify_reciprocal_family(N_list=(1, 2, 5), M: int = 30_000) -> VerifyResult:
    rep = verify_binomial_family("identity", "reciprocal", 0.5, N_list, M)
    ok = all(r["classification"].verdict == "geometrically-ergodic" and r["lim_gap"] > 0.05 for r in rep.rows)
    return VerifyResult("prop6", ok, f"verdicts {rep.verdicts()}", rep.to_json())


def verify_cyclic_family(N_list=(1, 2, 5), M: int = 30_000) -> VerifyResult:
    rep = verify_binomial_family("identity", "cyclic", 0.5, N_list, M)
    ok = all(r["classification"].verdict == "transient" for r in rep.rows)
    return VerifyResult("prop7", ok, f"verdicts {rep.verdicts()}", rep.to_json())


def verify_lemma_suite() -> VerifyResult:
    rep = check_lemmas()
    return VerifyResult("lemmas", rep.passed, f"{sum(rep.checks.values())} inequalities, "
                        f"{len(rep.violations)} violations", rep.to_json())


def smc_unbiasedness(T: int = 20, N: int = 50, replicates: int = 1000, seed: int = 7,
                     params: LgssmParams | None = None) -> dict:
    params = params or LgssmParams(0.0, 0.9, 1.0, 1.0)
    stream = RngStream(seed)
    _, y = simulate_lgssm(params, T, stream.generator("data"))
    exact = kalman_loglik(params, y)
    gen = stream.generator("filter")
    ratios = np.exp([bootstrap_pf_loglik(params, y, N, gen) - exact for _ in range(replicates)])
    se = float(ratios.std(ddof=1) / math.sqrt(replicates))
    return {"mean_ratio": float(ratios.mean()), "stderr": se, "T": T, "N": N,
            "replicates": replicates, "kalman_loglik": exact}


def verify_smc_unbiased(seed: int = 7) -> VerifyResult:
    ev = smc_unbiasedness(seed=seed)
    ok = abs(ev["mean_ratio"] - 1) <= 3 * ev["stderr"]
    return VerifyResult("smc-unbiased", ok, f"mean ratio {ev['mean_ratio']:.4f} (se {ev['stderr']:.4f})", ev)


def noisy_tv_curve(N_values=(10, 100, 1000), iterations: int = 10**5, seed: int = 7,
                   kind: str = "noisy", x0: float = 0.0) -> dict:
    out = {}
    for N in N_values:
        kernel = lognormal_example(N, kind)
        trace = run_chain(kernel, x0, iterations, RngStream(seed, N))
        out[N] = empirical_tv(trace, kernel.target, binning=Binning())
    return out


def verify_one_step_tv(seed: int = 7, N_values=(10, 100, 1000)) -> VerifyResult:
    """One-step TV between noisy and marginal kernels, sup over a state grid, decreasing in N."""
    grid = np.linspace(-4, 4, 17)
    sups = {}
    for N in N_values:
        kernel = lognormal_example(N)
        gen = RngStream(seed, N).generator("one-step")
        sups[N] = max(one_step_tv(kernel, x, gen=gen) for x in grid)
    vals = [sups[N] for N in N_values]
    ok = all(a > b for a, b in zip(vals, vals[1:]))
    return VerifyResult("one-step-tv", ok, "sup one-step TV " + ", ".join(f"N={N}: {sups[N]:.4f}" for N in N_values),
                        {"sup_one_step_tv": sups, "grid": grid.tolist()})


VERIFIERS = {
    "prop1": verify_ratio_ordering_report,
    "prop2": verify_homogeneous_transience,
    "prop3": verify_cyclic_transience,
    "prop4": verify_proposal_drift,
    "prop6": verify_reciprocal_family,
    "prop7": verify_cyclic_family,
    "lemmas": verify_lemma_suite,
    "smc-unbiased": verify_smc_unbiased,
    "one-step-tv": verify_one_step_tv,
}


def run_verify(vid: str, seed: int = 7, **kwargs) -> VerifyResult:
    if vid not in VERIFIERS:
        raise KeyError(f"unknown verify id {vid!r}; choose from {sorted(VERIFIERS)}")
    fn = VERIFIERS[vid]
    if "seed" in fn.__code__.co_varnames:
        kwargs.setdefault("seed", seed)
    res = fn(**kwargs)
    res.evidence = _jsonable(res.evidence)
    return res
