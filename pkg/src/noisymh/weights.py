"""Weight families Q_{x,N}: samplers, exact enumeration and condition checks.

A weight model is a state-indexed family of positive, mean-one random
variables. Average-type families return the arithmetic mean of ``N``
i.i.d. base weights. Samplers work with log-weights so that very small or
very large weights survive; :func:`sample_weight` exponentiates and refuses
non-positive results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import comb, logsumexp
from scipy.stats import norm

from .core import UnsupportedOperationError

CONDITIONS = ("W1", "W2", "W3", "W4", "W5")
DEFAULT_DRAWS = 10**5
# atoms within this distance of a tail threshold count as past it
THRESHOLD_SLACK = 1e-12


class WeightUnderflowError(ArithmeticError):
    """A weight draw was not strictly positive."""


class Estimate(NamedTuple):
    value: float
    stderr: float = 0.0
    draws: int = 0

    @property
    def exact(self) -> bool:
        return self.draws == 0


# ---------------------------------------------------------------------------
# parameter sequences (b_m, eps_m)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Seq:
    """A positive sequence indexed by m >= 1, usable elementwise on arrays.

    Kinds: ``const`` (value), ``identity`` (m), ``reciprocal`` (1/m),
    ``cyclic`` (m^-(3 - m mod 3)), ``table`` (explicit values for m = 1..len,
    the last entry repeated beyond).
    """

    kind: str
    value: float | tuple = 0.0

    def __post_init__(self):
        if self.kind not in ("const", "identity", "reciprocal", "cyclic", "table"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "table":
            object.__setattr__(self, "value", tuple(float(v) for v in self.value))

    def __call__(self, m):
        if isinstance(m, (int, np.integer)):
            return self._scalar(int(m))
        if self.kind == "const":
            return np.full(np.shape(m), float(self.value)) if np.ndim(m) else float(self.value)
        mf = np.asarray(m, dtype=float)
        if self.kind == "identity":
            out = mf
        elif self.kind == "reciprocal":
            out = 1.0 / mf
        elif self.kind == "cyclic":
            mi = np.asarray(m, dtype=np.int64)
            out = mf ** (-(3.0 - (mi % 3)))
        else:
            table = np.asarray(self.value)
            idx = np.clip(np.asarray(m, dtype=np.int64) - 1, 0, len(table) - 1)
            out = table[idx]
        return out if np.ndim(m) else float(out)

    def _scalar(self, m: int) -> float:
        if self.kind == "const":
            return float(self.value)
        if self.kind == "identity":
            return float(m)
        if self.kind == "reciprocal":
            return 1.0 / m
        if self.kind == "cyclic":
            return float(m) ** -(3 - m % 3)
        return self.value[min(max(m - 1, 0), len(self.value) - 1)]

    def to_json(self):
        if self.kind == "const":
            return float(self.value)
        if self.kind == "table":
            return list(self.value)
        return self.kind

    @classmethod
    def from_json(cls, obj) -> "Seq":
        if isinstance(obj, Seq):
            return obj
        if isinstance(obj, (int, float)):
            return cls("const", float(obj))
        if isinstance(obj, str):
            return cls(obj)
        if isinstance(obj, (list, tuple)):
            return cls("table", tuple(obj))
        raise ValueError(f"cannot read a sequence from {obj!r}")


def cyclic_eps(m):
    """m^-(3 - (m mod 3)): the non-monotone epsilon sequence of the transient examples."""
    return Seq("cyclic")(m)


# ---------------------------------------------------------------------------
# weight models
# ---------------------------------------------------------------------------


class WeightModel:
    """Base class. Subclasses implement :meth:`log_sample` and, if finite, :meth:`atoms`."""

    family = "abstract"
    is_homogeneous = False
    enumerable = False

    def log_sample(self, x, N: int, gen: np.random.Generator) -> float:
        raise NotImplementedError

    def log_sample_many(self, x, N: int, size: int, gen: np.random.Generator) -> np.ndarray:
        return np.array([self.log_sample(x, N, gen) for _ in range(size)])

    def atoms(self, x, N: int) -> tuple[np.ndarray, np.ndarray]:
        raise UnsupportedOperationError(f"{self.family} weights have infinite support")

    def base_moment(self, x, q: float) -> float:
        """E[W_x^q] for the N = 1 weight, when available in closed form."""
        if self.enumerable:
            v, p = self.atoms(x, 1)
            return float(np.sum(p * v**q))
        raise UnsupportedOperationError(f"no closed-form moments for {self.family}")

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class UnitWeights(WeightModel):
    """W identically 1: the marginal chain."""

    family = "unit"
    is_homogeneous = True
    enumerable = True

    def log_sample(self, x, N, gen):
        return 0.0

    def log_sample_many(self, x, N, size, gen):
        return np.zeros(size)

    def atoms(self, x, N):
        return np.ones(1), np.ones(1)

    def to_json(self):
        return {"family": self.family, "params": {}}


@dataclass(frozen=True)
class HomogeneousLogNormal(WeightModel):
    """Average of N log-normal weights exp(G), G ~ Normal(-sigma2/2, sigma2)."""

    sigma2: float = 1.0
    family = "lognormal"
    is_homogeneous = True

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")

    @property
    def _mu_sd(self):
        return -0.5 * self.sigma2, math.sqrt(self.sigma2)

    def log_sample(self, x, N, gen):
        mu, sd = self._mu_sd
        if N == 1:
            return float(gen.normal(mu, sd))
        g = gen.normal(mu, sd, size=N)
        top = g.max()
        return float(top + math.log(np.exp(g - top).sum() / N))

    def log_sample_many(self, x, N, size, gen, chunk: int = 2 * 10**7):
        mu, sd = self._mu_sd
        if N == 1:
            return gen.normal(mu, sd, size=size)
        out = np.empty(size)
        rows = max(1, chunk // N)
        for start in range(0, size, rows):
            stop = min(size, start + rows)
            g = gen.normal(mu, sd, size=(stop - start, N))
            out[start:stop] = logsumexp(g, axis=1) - math.log(N)
        return out

    def base_moment(self, x, q):
        # E[exp(qG)] = exp(q mu + q^2 sigma2 / 2)
        return math.exp(q * (q - 1) * self.sigma2 / 2)

    def to_json(self):
        return {"family": self.family, "params": {"sigma2": self.sigma2}}


def _two_point_s(b, eps):
    """Success probability making (b - eps) Ber(s) + eps mean one (0 when eps = 1)."""
    b = np.asarray(b, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0) or np.any(eps > 1):
        raise ValueError("eps must lie in (0, 1]")
    degenerate = eps >= 1.0
    if np.any((b <= 1) & ~degenerate):
        raise ValueError("b must exceed 1")
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(degenerate, 0.0, (1.0 - eps) / (b - eps))
    return s


def two_point_atoms(b, eps, N: int):
    """Atoms of eps + (b - eps) Bin(N, s) / N, vectorised over (b, eps) arrays.

    Returns ``(values, probs)`` with trailing axis of length N + 1.
    """
    b = np.asarray(b, dtype=float)
    eps = np.asarray(eps, dtype=float)
    s = _two_point_s(b, eps)[..., None]
    k = np.arange(N + 1, dtype=float)
    values = eps[..., None] + (b - eps)[..., None] * k / N
    probs = comb(N, k) * s**k * (1.0 - s) ** (N - k)
    return values, probs


@dataclass(frozen=True)
class BinomialAverage(WeightModel):
    """W_{m,N} = eps_m + (b_m - eps_m) Bin(N, s_m) / N with s_m = (1 - eps_m)/(b_m - eps_m).

    This is the N-average of two-point base weights (b_m - eps_m) Ber(s_m) + eps_m.
    When eps_m = 1 the weight is identically one.
    """

    b: Seq = Seq("const", 2.0)
    eps: Seq = Seq("const", 0.5)
    family = "binomial_average"
    enumerable = True

    def __post_init__(self):
        object.__setattr__(self, "b", Seq.from_json(self.b))
        object.__setattr__(self, "eps", Seq.from_json(self.eps))

    @property
    def is_homogeneous(self):
        return self.b.kind == "const" and self.eps.kind == "const"

    def params_at(self, m):
        b, eps = self.b(m), self.eps(m)
        if isinstance(b, float) and isinstance(eps, float):
            if not 0 < eps <= 1 or (eps < 1 and b <= 1):
                _two_point_s(b, eps)
            return b, eps, (0.0 if eps >= 1 else (1.0 - eps) / (b - eps))
        return b, eps, _two_point_s(b, eps)

    def log_sample(self, x, N, gen):
        b, eps, s = self.params_at(x)
        k = gen.binomial(N, float(s))
        return math.log(eps + (b - eps) * k / N)

    def log_sample_many(self, x, N, size, gen):
        b, eps, s = self.params_at(x)
        k = gen.binomial(N, float(s), size=size)
        return np.log(eps + (b - eps) * k / N)

    def atoms(self, x, N):
        return two_point_atoms(self.b(x), self.eps(x), N)

    def to_json(self):
        return {"family": self.family, "params": {"b": self.b.to_json(), "eps": self.eps.to_json()}}


def TwoPointHomogeneous(b: float, eps: float) -> BinomialAverage:
    """(b - eps) Ber(s) + eps with constant (b, eps); N-averages are binomial."""
    return BinomialAverage(Seq("const", float(b)), Seq("const", float(eps)))


def TwoPointInhomogeneous(b: float, eps) -> BinomialAverage:
    """Constant b with a state-dependent eps_m sequence (tag, table or callable Seq)."""
    return BinomialAverage(Seq("const", float(b)), Seq.from_json(eps))


def sample_weight(model: WeightModel, x, N: int, gen: np.random.Generator) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    w = math.exp(model.log_sample(x, N, gen))
    if not w > 0 or not math.isfinite(w):
        raise WeightUnderflowError(f"non-positive or non-finite weight {w!r} at x={x!r}, N={N}")
    return w


def enumerate_weight(model: WeightModel, x, N: int) -> list[tuple[float, float]]:
    if N < 1:
        raise ValueError("N must be >= 1")
    values, probs = model.atoms(x, N)
    return list(zip(values.tolist(), probs.tolist()))


def weight_model_from_json(obj: dict) -> WeightModel:
    family = obj.get("family")
    params = dict(obj.get("params", {}))
    if family == "unit":
        return UnitWeights()
    if family == "lognormal":
        return HomogeneousLogNormal(float(params["sigma2"]))
    if family == "two_point":
        return TwoPointHomogeneous(float(params["b"]), float(params["eps"]))
    if family == "two_point_inhomogeneous":
        return TwoPointInhomogeneous(float(params["b"]), params["eps"])
    if family == "binomial_average":
        return BinomialAverage(Seq.from_json(params["b"]), Seq.from_json(params["eps"]))
    if family == "smc":
        raise ValueError("SMC weights are built from an observation series; use the pmmh experiment")
    raise ValueError(f"unknown weight family {family!r}")


# ---------------------------------------------------------------------------
# moments and tails
# ---------------------------------------------------------------------------


def _resolve_mode(model: WeightModel, mode: str) -> str:
    if mode == "auto":
        return "exact" if model.enumerable else "mc"
    if mode not in ("exact", "mc"):
        raise ValueError(f"mode must be 'exact', 'mc' or 'auto', got {mode!r}")
    return mode


def _mc(values: np.ndarray) -> Estimate:
    n = len(values)
    return Estimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(n)), n)


def negative_moment(model: WeightModel, x, N: int, p: float, mode: str = "auto",
                    draws: int = DEFAULT_DRAWS, gen: np.random.Generator | None = None) -> Estimate:
    """E[W_{x,N}^-p], exact for finite supports (or closed form), else Monte Carlo."""
    if p <= 0:
        raise ValueError("p must be positive")
    mode = _resolve_mode(model, mode)
    if mode == "exact":
        if model.enumerable:
            v, pr = model.atoms(x, N)
            keep = pr > 0
            return Estimate(float(np.sum(pr[keep] * v[keep] ** (-p))))
        if N == 1:
            try:
                return Estimate(model.base_moment(x, -p))
            except UnsupportedOperationError:
                pass
        raise UnsupportedOperationError(f"no exact negative moment for {model.family} at N={N}")
    gen = gen if gen is not None else np.random.default_rng()
    return _mc(np.exp(-p * model.log_sample_many(x, N, draws, gen)))


def small_ball_moment_bound(p: float, M: float, alpha: float, gamma: float) -> float:
    """Bound on E[Z^-p] when P[Z <= z] <= M z^alpha on (0, gamma) with alpha > p."""
    if not (0 < gamma < 1 and alpha > p > 0):
        raise ValueError("need 0 < gamma < 1 and alpha > p > 0")
    return gamma**-p + p * M * gamma ** (alpha - p) / (alpha - p)


def small_ball_sum_bound(Ms, alphas, z: float) -> float:
    """Bound on P[Z_1 + ... + Z_n <= z] from per-term bounds P[Z_i <= z] <= M_i z^alpha_i."""
    Ms, alphas = np.asarray(Ms, dtype=float), np.asarray(alphas, dtype=float)
    return float(np.prod(Ms) * z ** alphas.sum())


def tail_probability(model: WeightModel, x, N: int, delta: float, mode: str = "auto",
                     draws: int = DEFAULT_DRAWS, gen: np.random.Generator | None = None) -> Estimate:
    """P[|W_{x,N} - 1| >= delta]."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    mode = _resolve_mode(model, mode)
    if mode == "exact":
        v, pr = model.atoms(x, N)
        return Estimate(float(np.sum(pr[np.abs(v - 1.0) >= delta - THRESHOLD_SLACK])))
    gen = gen if gen is not None else np.random.default_rng()
    w = np.exp(model.log_sample_many(x, N, draws, gen))
    return _mc((np.abs(w - 1.0) >= delta).astype(float))


def expected_min_ratio(model: WeightModel, x, y, N: int, k: float, mode: str = "auto",
                       draws: int = DEFAULT_DRAWS, gen: np.random.Generator | None = None,
                       model_y: WeightModel | None = None) -> Estimate:
    """E[min{1, k W_y / W_x}] with W_x, W_y independent."""
    if k <= 0:
        raise ValueError("k must be positive")
    model_y = model_y or model
    mode = "exact" if mode == "auto" and model.enumerable and model_y.enumerable else mode
    mode = "mc" if mode == "auto" else mode
    log_k = math.log(k)
    if mode == "exact":
        vx, px = model.atoms(x, N)
        vy, py = model_y.atoms(y, N)
        lr = log_k + np.log(vy)[None, :] - np.log(vx)[:, None]
        return Estimate(float(np.sum(px[:, None] * py[None, :] * np.exp(np.minimum(lr, 0.0)))))
    gen = gen if gen is not None else np.random.default_rng()
    lw = model.log_sample_many(x, N, draws, gen)
    lu = model_y.log_sample_many(y, N, draws, gen)
    return _mc(np.exp(np.minimum(log_k + lu - lw, 0.0)))


def ratio_lower_tail(model: WeightModel, z, x, N: int, delta: float) -> float:
    """P[W_z / W_x <= 1 - delta] by double enumeration."""
    vz, pz = model.atoms(z, N)
    vx, px = model.atoms(x, N)
    hit = vz[None, :] / vx[:, None] <= 1.0 - delta
    return float(np.sum(px[:, None] * pz[None, :] * hit))


# ---------------------------------------------------------------------------
# condition checks
# ---------------------------------------------------------------------------


@dataclass
class ConditionReport:
    """Grid evidence for one of the weight conditions W1..W5.

    ``statistic`` has one row per grid state and one column per probed N
    (or per K for W3, per w for W4). Suprema are over the recorded grid only.
    """

    condition: str
    grid: list
    N_values: list
    statistic: np.ndarray
    verdict: str
    witness: tuple | None = None
    details: dict = field(default_factory=dict)

    def grid_sup(self) -> np.ndarray:
        return np.max(self.statistic, axis=0)

    def to_json(self) -> dict:
        return {
            "condition": self.condition,
            "grid": [int(g) if isinstance(g, (int, np.integer)) else g for g in self.grid],
            "N_values": list(self.N_values),
            "grid_sup": self.grid_sup().tolist(),
            "verdict": self.verdict,
            "witness": list(self.witness) if self.witness else None,
            "details": self.details,
        }


def _witness(stat: np.ndarray, grid, cols, col_index=-1):
    i = int(np.argmax(stat[:, col_index]))
    return (grid[i], cols[col_index], float(stat[i, col_index]))


def _limit_verdict(stat, grid, cols, target, tol):
    """Verdict for conditions of the form lim_N sup_x stat = target."""
    sup = np.max(stat, axis=0) - target
    if sup[-1] <= tol:
        return "satisfied-on-grid", None
    if len(sup) == 1 or np.all(np.diff(sup) >= -tol) or not np.isfinite(sup[-1]):
        return "violated", _witness(stat, grid, cols)
    return "inconclusive", None


def check_condition(model: WeightModel, which: str, grid: Sequence, N_values: Sequence[int] = (1,),
                    params: dict | None = None, gen: np.random.Generator | None = None) -> ConditionReport:
    """Tabulate the statistic behind condition ``which`` over ``grid`` x ``N_values``.

    params: ``delta`` (W1, default 0.5), ``tol`` (default 0.05), ``K_values``
    (W3), ``gamma``/``M``/``beta`` (W4, gamma default 0.9), ``k`` (W5,
    default 1), ``draws`` for Monte Carlo statistics.
    """
    if which not in CONDITIONS:
        raise ValueError(f"unknown condition {which!r}")
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    params = dict(params or {})
    tol = params.get("tol", 0.05)
    draws = params.get("draws", DEFAULT_DRAWS)
    gen = gen if gen is not None else np.random.default_rng(params.get("seed", 0))
    N_values = list(N_values)

    if which == "W1":
        delta = params.get("delta", 0.5)
        stat = np.array([[tail_probability(model, x, N, delta, draws=draws, gen=gen).value
                          for N in N_values] for x in grid])
        verdict, wit = _limit_verdict(stat, grid, N_values, 0.0, tol)
        return ConditionReport(which, grid, N_values, stat, verdict, wit, {"delta": delta, "tol": tol})

    if which == "W2":
        stat = np.array([[negative_moment(model, x, N, 1.0, draws=draws, gen=gen).value
                          for N in N_values] for x in grid])
        verdict, wit = _limit_verdict(stat, grid, N_values, 1.0, tol)
        return ConditionReport(which, grid, N_values, stat, verdict, wit, {"tol": tol})

    if which == "W3":
        K_values = list(params.get("K_values", (2.0, 10.0, 100.0, 1000.0)))
        stat = np.array([[_truncated_mean(model, x, K, draws, gen) for K in K_values] for x in grid])
        verdict, wit = _limit_verdict(stat, grid, K_values, 0.0, tol)
        return ConditionReport(which, grid, [1], stat, verdict, wit, {"K_values": K_values, "tol": tol})

    if which == "W4":
        return _check_w4(model, grid, params, draws, gen)

    k = params.get("k", 1.0)
    col = []
    for x in grid:
        try:
            col.append(model.base_moment(x, 1.0 + k))
        except UnsupportedOperationError:
            lw = model.log_sample_many(x, 1, draws, gen)
            col.append(float(np.mean(np.exp((1.0 + k) * lw))))
    stat = np.array(col)[:, None]
    finite = np.all(np.isfinite(stat))
    tail = stat[-max(2, len(grid) // 4):, 0]
    if not finite:
        verdict, wit = "violated", _witness(np.where(np.isfinite(stat), stat, np.inf), grid, [1])
    elif len(grid) >= 4 and np.all(np.diff(tail) > 0):
        verdict, wit = "inconclusive", None
    else:
        verdict, wit = "satisfied-on-grid", None
    return ConditionReport("W5", grid, [1], stat, verdict, wit, {"k": k})


def _truncated_mean(model, x, K, draws, gen):
    """E[W_x 1{W_x > K}] for the N = 1 weight."""
    if model.enumerable:
        v, p = model.atoms(x, 1)
        return float(np.sum(p * v * (v > K)))
    if isinstance(model, HomogeneousLogNormal):
        # size-biased log-weight is Normal(+sigma2/2, sigma2)
        sd = math.sqrt(model.sigma2)
        return float(norm.sf((math.log(K) - 0.5 * model.sigma2) / sd))
    w = np.exp(model.log_sample_many(x, 1, draws, gen))
    return float(np.mean(w * (w > K)))


def _lower_cdf(model, x, w_grid, draws, gen):
    if model.enumerable:
        v, p = model.atoms(x, 1)
        return np.array([np.sum(p[v <= w]) for w in w_grid])
    if isinstance(model, HomogeneousLogNormal):
        sd = math.sqrt(model.sigma2)
        return norm.cdf((np.log(w_grid) + 0.5 * model.sigma2) / sd)
    w = np.sort(np.exp(model.log_sample_many(x, 1, draws, gen)))
    return np.searchsorted(w, w_grid, side="right") / len(w)


def _check_w4(model, grid, params, draws, gen):
    gamma = params.get("gamma", 0.9)
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    n_points = params.get("n_points", 20)
    w_grid = gamma * np.geomspace(1e-4, 1.0, n_points + 1)[:-1]
    cdf = np.array([_lower_cdf(model, x, w_grid, draws, gen) for x in grid])
    sup_cdf = cdf.max(axis=0)
    details = {"gamma": gamma, "w_grid": w_grid.tolist(), "sup_cdf": sup_cdf.tolist()}
    if "M" in params and "beta" in params:
        M, beta = float(params["M"]), float(params["beta"])
        bound = M * w_grid**beta
        bad = np.nonzero(cdf > bound[None, :] + THRESHOLD_SLACK)
        details.update(M=M, beta=beta, fitted=False)
        if len(bad[0]):
            i, j = bad[0][0], bad[1][0]
            return ConditionReport("W4", grid, [1], cdf, "violated", (grid[i], float(w_grid[j]), float(cdf[i, j])), details)
        return ConditionReport("W4", grid, [1], cdf, "satisfied-on-grid", None, details)

    if sup_cdf[0] == 0.0:
        # no mass below the smallest probed w: any beta works with a finite M
        positive = sup_cdf > 0
        beta = 1.0
        M = float(np.max(sup_cdf[positive] / w_grid[positive] ** beta)) if positive.any() else 0.0
        details.update(M=M, beta=beta, fitted=True, note="no mass near zero on grid")
        return ConditionReport("W4", grid, [1], cdf, "satisfied-on-grid", None, details)
    lower = slice(0, n_points // 2)
    slope = float(np.polyfit(np.log(w_grid[lower]), np.log(sup_cdf[lower]), 1)[0])
    details.update(beta=slope, fitted=True)
    if slope <= 0.05:
        i = int(np.argmax(cdf[:, 0]))
        return ConditionReport("W4", grid, [1], cdf, "violated", (grid[i], float(w_grid[0]), float(cdf[i, 0])), details)
    M = float(np.max(sup_cdf / w_grid**slope))
    details["M"] = M
    return ConditionReport("W4", grid, [1], cdf, "satisfied-on-grid", None, details)
