"""Chain diagnostics: autocorrelation, acceptance, TV distances, drift ratios, rate bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .core import ChainTrace, Target, as_chain_rng
from .kernels import Kernel, marginal_acceptance, noisy_acceptance, noisy_rejection

DEFAULT_BINS = 50
DEFAULT_SPAN = 4.0


class InconclusiveBoundError(ValueError):
    """The rate bound's largeness precondition on r(N) fails."""


class Acf(NamedTuple):
    values: np.ndarray
    degenerate: bool


def _as_series(trace, component: int = 0) -> np.ndarray:
    if isinstance(trace, ChainTrace):
        return np.asarray(trace.component(component), dtype=float)
    x = np.asarray(trace, dtype=float)
    return x[:, component] if x.ndim == 2 else x


def acf(trace, max_lag: int, component: int = 0) -> Acf:
    """Autocorrelations at lags 0..max_lag with the biased (1/n) normalisation."""
    x = _as_series(trace, component)
    n = len(x)
    if n <= max_lag:
        raise ValueError(f"trace of length {n} is too short for lag {max_lag}")
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        return Acf(np.ones(max_lag + 1), True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    full = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    vals = full / denom
    vals[0] = 1.0
    return Acf(vals, False)


def mean_acceptance(trace) -> float:
    accepted = trace.accepted if isinstance(trace, ChainTrace) else trace
    accepted = np.asarray(accepted, dtype=bool)
    if accepted.size == 0:
        raise ValueError("no transitions to average over")
    return float(accepted.mean())


def batch_means_se(x, batches: int = 50) -> float:
    """Monte Carlo standard error of the mean of a correlated series."""
    x = np.asarray(x, dtype=float)
    size = len(x) // batches
    if size < 1:
        raise ValueError("series shorter than the number of batches")
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


# ---------------------------------------------------------------------------
# total variation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Binning:
    bins: int = DEFAULT_BINS
    low: float = -DEFAULT_SPAN
    high: float = DEFAULT_SPAN

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.low, self.high, self.bins + 1)


def _bin_masses(target: Target, edges: np.ndarray) -> np.ndarray:
    """Target mass in (-inf, e0), each bin, and (e_k, inf)."""
    if target.cdf is not None:
        c = np.concatenate([[0.0], target.cdf(edges), [1.0]])
        return np.diff(c)

    def dens(t):
        return math.exp(target.log_density(np.array([t])))

    pts = np.concatenate([[-np.inf], edges, [np.inf]])
    mass = np.array([integrate.quad(dens, a, b)[0] for a, b in zip(pts[:-1], pts[1:])])
    return mass / mass.sum()


def empirical_tv(trace, target: Target, burnin: int = 0, binning: Binning | None = None,
                 component: int = 0) -> float:
    """Half L1 distance between the empirical law of the trace and the target.

    Discrete targets are compared atom by atom using ``target.pmf``; real
    targets bin coordinate ``component`` with two extra cells for the mass
    outside the binning range.
    """
    states = trace.states if isinstance(trace, ChainTrace) else trace
    states = np.asarray(states)[burnin:]
    if len(states) == 0:
        raise ValueError("empty trace after burn-in")
    if target.discrete:
        if target.pmf is None:
            raise ValueError("discrete TV needs a target with a normalised pmf")
        states = states.astype(np.int64)
        lo, hi = int(states.min()), int(states.max())
        counts = np.bincount(states - lo, minlength=hi - lo + 1) / len(states)
        support = np.arange(lo, hi + 1)
        pi = target.pmf(support)
        if target.support == "positive_integers":
            left = float(np.sum(target.pmf(np.arange(1, lo)))) if lo > 1 else 0.0
            right = max(0.0, 1.0 - left - float(np.sum(pi)))
        else:
            left = right = 0.0
        return 0.5 * (float(np.abs(counts - pi).sum()) + left + right)
    binning = binning or Binning()
    x = states[:, component] if states.ndim == 2 else states
    edges = binning.edges
    idx = np.searchsorted(edges, x, side="right")
    counts = np.bincount(idx, minlength=len(edges) + 1) / len(x)
    return 0.5 * float(np.abs(counts - _bin_masses(target, edges)).sum())


def one_step_tv(kernel: Kernel, x, grid: int = 401, span: float = 8.0, draws: int = 4000,
                gen: np.random.Generator | None = None) -> float:
    """TV between the noisy and marginal one-step laws from x (1-d Gaussian walk).

    Both laws are q(x, y) alpha(x, y) dy off the diagonal plus an atom at x,
    so the distance is half of the integrated |alpha~ - alpha| plus half the
    difference of the rejection probabilities. alpha~ is estimated with the
    same weight draws at every y.
    """
    if kernel.proposal.kind != "gaussian_walk" or kernel.target.dim != 1:
        raise ValueError("one_step_tv handles the 1-d Gaussian walk")
    gen = gen if gen is not None else np.random.default_rng(0)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sd = float(np.atleast_1d(kernel.proposal.variance)[0]) ** 0.5
    ys = x[0] + np.linspace(-span * sd, span * sd, grid)
    dy = ys[1] - ys[0]
    qd = np.exp(-0.5 * ((ys - x[0]) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
    lpx = kernel.target.log_pi(x)
    lr = np.array([kernel.target.log_pi(np.array([y])) for y in ys]) - lpx
    alpha = np.exp(np.minimum(lr, 0.0))
    lw = kernel.weights.log_sample_many(x, kernel.N, draws, gen)
    lu = kernel.weights.log_sample_many(x, kernel.N, draws, gen)
    noise = lu - lw
    tilde = np.array([np.exp(np.minimum(r + noise, 0.0)).mean() for r in lr])
    diff = (tilde - alpha) * qd * dy
    return 0.5 * (float(np.abs(diff).sum()) + abs(float(diff.sum())))


# ---------------------------------------------------------------------------
# drift
# ---------------------------------------------------------------------------


def drift_ratio(kernel: Kernel, V: Callable, x, mode: str = "exact", draws: int = 10**4,
                rng=None) -> float | tuple[float, float]:
    """(P V)(x) / V(x) for the marginal or noisy kernel.

    ``exact`` uses the three-term sum over the integer walk's neighbours;
    ``mc`` simulates one-step transitions and returns (estimate, stderr).
    """
    vx = V(x)
    if vx < 1:
        raise ValueError(f"drift function must be >= 1, V({x!r}) = {vx}")
    if mode == "exact":
        total = 0.0
        for y, prob in kernel.proposal.neighbors(x):
            total += prob * noisy_acceptance(kernel, x, y, mode="exact").value * V(y)
        return (total + noisy_rejection(kernel, x, mode="exact").value * vx) / vx
    if mode != "mc":
        raise ValueError("mode must be 'exact' or 'mc'")
    if kernel.kind == "pseudo_marginal":
        raise ValueError("the pseudo-marginal kernel lives on (x, w); use marginal or noisy")
    crng = as_chain_rng(rng)
    lpx = kernel.target.log_pi(x)
    vals = np.empty(draws)
    for i in range(draws):
        y, _, _, acc, _, _ = kernel._transition(x, lpx, None, crng)
        vals[i] = V(y) if acc else vx
    vals /= vx
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(draws))


def power_drift(target: Target, s: float = 0.5) -> Callable:
    """V = pi^{-s}, normalised so that V >= 1 whenever pi <= 1."""

    def V(x):
        return math.exp(-s * target.log_pi(x))

    return V


# ---------------------------------------------------------------------------
# rate bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TvRateParams:
    R: float
    tau: float
    r: Callable | float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")

    def r_at(self, N) -> float:
        return float(self.r(N)) if callable(self.r) else float(self.r)


class RateBound(NamedTuple):
    bound: float
    n: int


def rate_objective(R: float, tau: float, r: float, n):
    return 2 * R * tau**n + n / r


def continuous_minimiser(R: float, tau: float, r: float) -> float:
    lt = math.log(1 / tau)
    return math.log(2 * R * r * lt) / lt


def tv_rate_bound(params: TvRateParams, N=None) -> RateBound:
    """min over n >= 1 of 2 R tau^n + n / r(N), with its argmin.

    The objective is convex in n, so the integer minimum sits at the floor or
    ceiling of the continuous minimiser.
    """
    R, tau, r = params.R, params.tau, params.r_at(N)
    lt = math.log(1 / tau)
    if not r > 0 or math.log(2 * R * r * lt) < 1:
        raise InconclusiveBoundError(
            f"r(N) = {r} is too small: need log(2 R r log(1/tau)) >= 1")
    s = continuous_minimiser(R, tau, r)
    cands = sorted({max(1, math.floor(s)), max(1, math.ceil(s))})
    vals = [rate_objective(R, tau, r, n) for n in cands]
    i = int(np.argmin(vals))
    return RateBound(vals[i], cands[i])


def rate_bound_closed_form(R: float, tau: float, r: float) -> float:
    """Objective at the continuous minimiser plus one; an upper bound on the integer minimum."""
    lt = math.log(1 / tau)
    return (1 + (tau + math.log(2 * R * r * lt)) / lt) / r
