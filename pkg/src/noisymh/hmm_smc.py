"""Linear-Gaussian hidden Markov model, Kalman and bootstrap-filter likelihoods, PMMH kernels.

Model with known initial state x0:

    X_t = a X_{t-1} + N(0, sx2),   Y_t = X_t + N(0, sy2),   t = 1..T.

PMMH parameters are sampled on an unconstrained scale: x0 and a as they
are, variances as log-variances. The box-uniform prior on the natural
scale therefore picks up the Jacobian sx2 * sy2 on the log scale.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Target, gaussian_walk
from .kernels import Kernel
from .weights import WeightModel

PARAM_NAMES = ("x0", "a", "sx2", "sy2")
_LOG_2PI = math.log(2 * math.pi)


class ParticleUnderflowWarning(RuntimeWarning):
    """All particle weights vanished numerically; the estimate is -inf."""


@dataclass(frozen=True)
class LgssmParams:
    x0: float = 0.0
    a: float = 0.9
    sx2: float = 1.0
    sy2: float = 1.0

    def __post_init__(self):
        if not (self.sx2 > 0 and self.sy2 > 0):
            raise ValueError("variances must be strictly positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}


def simulate_lgssm(params: LgssmParams, T: int, gen: np.random.Generator):
    """Latent path X_1..X_T and observations Y_1..Y_T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    ex = gen.standard_normal(T) * math.sqrt(params.sx2)
    ey = gen.standard_normal(T) * math.sqrt(params.sy2)
    x = np.empty(T)
    prev = params.x0
    for t in range(T):
        prev = params.a * prev + ex[t]
        x[t] = prev
    return x, x + ey


def kalman_loglik(params: LgssmParams, y) -> float:
    """Exact log-likelihood; the filter starts from the point mass at x0."""
    mean, var = params.x0, 0.0
    total = 0.0
    for obs in np.asarray(y, dtype=float):
        mean, var = params.a * mean, params.a * params.a * var + params.sx2
        s = var + params.sy2
        resid = obs - mean
        total -= 0.5 * (_LOG_2PI + math.log(s) + resid * resid / s)
        gain = var / s
        mean, var = mean + gain * resid, (1 - gain) * var
    return total


def bootstrap_pf_loglik(params: LgssmParams, y, N: int, gen: np.random.Generator) -> float:
    """Bootstrap particle filter estimate of the log-likelihood.

    Multinomial resampling at every step; exp of the result is an unbiased
    estimate of the likelihood.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    y = np.asarray(y, dtype=float)
    sx, sy2 = math.sqrt(params.sx2), params.sy2
    log_norm = -0.5 * (_LOG_2PI + math.log(sy2))
    T = len(y)
    noise = gen.standard_normal((T, N))
    noise *= sx
    unif = gen.random((T, N))
    particles = np.full(N, float(params.x0))
    a = params.a
    total = 0.0
    for t in range(T):
        particles = a * particles + noise[t]
        resid = y[t] - particles
        with np.errstate(over="ignore"):
            logw = (-0.5 / sy2) * (resid * resid)
        top = logw.max()
        if not np.isfinite(top):
            warnings.warn(f"all particle weights underflowed at t={t + 1}", ParticleUnderflowWarning)
            return -math.inf
        w = np.exp(logw - top)
        cdf = w.cumsum()
        total += top + math.log(cdf[-1] / N)
        if t + 1 < T:
            unif[t] *= cdf[-1]
            particles = particles[np.minimum(cdf.searchsorted(unif[t], side="right"), N - 1)]
    total += T * log_norm
    return total


# ---------------------------------------------------------------------------
# parameterisation for PMMH
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamMap:
    """Maps the sampled vector onto LgssmParams.

    ``free`` lists the sampled parameters in order; the rest stay at
    ``fixed``. Variances are sampled as log-variances.
    """

    free: tuple = PARAM_NAMES
    fixed: LgssmParams = field(default_factory=LgssmParams)

    def __post_init__(self):
        bad = set(self.free) - set(PARAM_NAMES)
        if bad or not self.free:
            raise ValueError(f"free parameters must be a non-empty subset of {PARAM_NAMES}")

    @property
    def dim(self) -> int:
        return len(self.free)

    def to_params(self, z) -> LgssmParams:
        vals = self.fixed.to_dict()
        for name, v in zip(self.free, np.asarray(z, dtype=float)):
            vals[name] = math.exp(v) if name in ("sx2", "sy2") else float(v)
        return LgssmParams(**vals)

    def to_vector(self, params: LgssmParams) -> np.ndarray:
        d = params.to_dict()
        return np.array([math.log(d[n]) if n in ("sx2", "sy2") else d[n] for n in self.free])


@dataclass(frozen=True)
class BoxPrior:
    """Independent uniform priors on the natural scale, {name: (low, high)}."""

    bounds: dict

    def log_density(self, pmap: ParamMap, z) -> float:
        z = np.asarray(z, dtype=float)
        total = 0.0
        for name, v in zip(pmap.free, z):
            lo, hi = self.bounds[name]
            natural = math.exp(v) if name in ("sx2", "sy2") else v
            if not lo <= natural <= hi:
                return -math.inf
            total -= math.log(hi - lo)
            if name in ("sx2", "sy2"):
                total += v
        return total


DEFAULT_BOUNDS = {"x0": (-10.0, 10.0), "a": (-1.0, 1.0), "sx2": (1e-3, 10.0), "sy2": (1e-3, 10.0)}


class SmcLikelihoodWeight(WeightModel):
    """Particle-filter likelihood as a weight on the PMMH parameter vector.

    With ``normalized=False`` the log weight is the raw filter estimate and
    the matching target is the prior alone, so the Kalman likelihood is
    never evaluated during sampling. With ``normalized=True`` the Kalman
    log-likelihood is subtracted, giving a mean-one weight for the posterior
    target (used for checks).
    """

    family = "smc"
    is_homogeneous = False

    def __init__(self, y, pmap: ParamMap, normalized: bool = False):
        self.y = np.asarray(y, dtype=float)
        self.pmap = pmap
        self.normalized = normalized

    def log_sample(self, x, N, gen):
        params = self.pmap.to_params(x)
        lw = bootstrap_pf_loglik(params, self.y, N, gen)
        if self.normalized:
            lw -= kalman_loglik(params, self.y)
        return lw

    def to_json(self):
        return {"family": self.family, "params": {"free": list(self.pmap.free), "normalized": self.normalized}}


class KalmanLikelihoodWeight(WeightModel):
    """Exact likelihood in place of the filter: a degenerate (deterministic) weight."""

    family = "kalman"
    is_homogeneous = False

    def __init__(self, y, pmap: ParamMap):
        self.y = np.asarray(y, dtype=float)
        self.pmap = pmap

    def log_sample(self, x, N, gen):
        return kalman_loglik(self.pmap.to_params(x), self.y)

    def to_json(self):
        return {"family": self.family, "params": {"free": list(self.pmap.free)}}


@dataclass
class PmmhKernels:
    pseudo_marginal: Kernel
    noisy: Kernel
    marginal: Kernel
    pmap: ParamMap
    prior: BoxPrior


def pmmh_kernels(y, N: int, pmap: ParamMap | None = None, prior: BoxPrior | None = None,
                 step_variance=0.01, estimator: str = "pf") -> PmmhKernels:
    """Pseudo-marginal and noisy PMMH kernels plus the Kalman-exact marginal reference.

    ``estimator="kalman"`` swaps the particle filter for the exact likelihood,
    which makes all three kernels perform the same arithmetic.
    """
    pmap = pmap or ParamMap()
    prior = prior or BoxPrior({k: DEFAULT_BOUNDS[k] for k in pmap.free})
    y = np.asarray(y, dtype=float)

    def log_prior(z):
        return prior.log_density(pmap, z)

    def log_post(z):
        lp = prior.log_density(pmap, z)
        return lp + kalman_loglik(pmap.to_params(z), y) if math.isfinite(lp) else lp

    prior_target = Target(log_prior, "real_vector", dim=pmap.dim, name="lgssm-prior")
    post_target = Target(log_post, "real_vector", dim=pmap.dim, name="lgssm-posterior")
    proposal = gaussian_walk(step_variance)
    if estimator == "pf":
        weights = SmcLikelihoodWeight(y, pmap)
    elif estimator == "kalman":
        weights = KalmanLikelihoodWeight(y, pmap)
    else:
        raise ValueError("estimator must be 'pf' or 'kalman'")
    return PmmhKernels(
        pseudo_marginal=Kernel("pseudo_marginal", prior_target, proposal, weights, N),
        noisy=Kernel("noisy", prior_target, proposal, weights, N),
        marginal=Kernel("marginal", post_target, proposal),
        pmap=pmap,
        prior=prior,
    )


def write_series_csv(path, y) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "y"])
        for t, v in enumerate(np.asarray(y, dtype=float), start=1):
            w.writerow([t, repr(float(v))])


def read_series_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty observation series")
    return np.array([float(r["y"]) for r in sorted(rows, key=lambda r: int(r["t"]))])
