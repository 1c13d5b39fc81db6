"""Exact nearest-neighbour chains on the positive integers and their classification.

A :class:`BirthDeathChain` holds p(m) = P(m, {m+1}) and q(m) = P(m, {m-1})
as vectorised functions of m. For noisy kernels with enumerable weights
these are computed exactly by double sums over weight atoms.

:func:`classify` evaluates the two series criteria

    recurrence:           sum_m prod_{i=2}^m q_i / p_i       diverges
    positive recurrence:  sum_m prod_{i=2}^m p_{i-1} / q_i   converges

on a truncation m <= M, in log space, with an honest three-valued answer
per series (converges / diverges / inconclusive), and declares geometric
ergodicity when the extrapolated tail limits satisfy lim p < lim q.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .core import Target, UnsupportedOperationError, geometric_target
from .weights import BinomialAverage, Estimate, Seq, UnitWeights, WeightModel, two_point_atoms

VERDICTS = ("transient", "recurrent-null", "positive-recurrent", "geometrically-ergodic", "inconclusive")
DEFAULT_M = 30_000
DEFAULT_TOL = 1e-12
# the second half of the truncation alone adding this much means divergence
DIVERGENCE_LEVEL = 1e12
# terms of a series that stay above this over the last half do not tend to zero
TERM_FLOOR = 1e-3


class InvalidChainError(ValueError):
    """Transition probabilities violate the birth-death assumptions."""


@dataclass
class BirthDeathChain:
    """Up/down probabilities of a nearest-neighbour chain on {1, 2, ...}.

    ``p`` and ``q`` map an integer array of states to arrays of
    probabilities; q(1) is forced to 0. ``period`` is the length of any
    periodic pattern in the tail (3 for the m mod 3 examples); it only
    affects how tail limits are extrapolated.
    """

    p: Callable[[np.ndarray], np.ndarray]
    q: Callable[[np.ndarray], np.ndarray]
    source: str = "user-table"
    period: int = 1
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def table(self, M: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (p, q) for m = 1..M (index m - 1)."""
        if self._cache.get("M", 0) < M:
            m = np.arange(1, M + 1)
            p = np.asarray(self.p(m), dtype=float)
            q = np.asarray(self.q(m), dtype=float).copy()
            q[0] = 0.0
            self._cache.update(M=M, p=p, q=q)
        return self._cache["p"][:M], self._cache["q"][:M]

    def at(self, m: int) -> tuple[float, float]:
        p, q = self.table(max(m, 2))
        return float(p[m - 1]), float(q[m - 1])


@dataclass
class WalkClassification:
    verdict: str
    evidence: dict
    M: int
    tol: float

    @property
    def recurrent(self) -> bool:
        return self.verdict in ("recurrent-null", "positive-recurrent", "geometrically-ergodic")

    @property
    def positive_recurrent(self) -> bool:
        return self.verdict in ("positive-recurrent", "geometrically-ergodic")

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "M": self.M, "tol": self.tol, "evidence": self.evidence}


# ---------------------------------------------------------------------------
# building chains
# ---------------------------------------------------------------------------


def _log_target(target: Target, m: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(target.log_density(m), dtype=float)
        if out.shape == m.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([target.log_density(int(v)) for v in m], dtype=float)


def _noisy_acceptance_two_point(weights: BinomialAverage, N: int, m: np.ndarray, y: np.ndarray,
                           log_ratio: np.ndarray) -> np.ndarray:
    """Exact E[min{1, exp(log_ratio) U / W}] with W at m, U at y, vectorised over m."""
    vw, pw = two_point_atoms(weights.b(m), weights.eps(m), N)
    vu, pu = two_point_atoms(weights.b(y), weights.eps(y), N)
    l = log_ratio[:, None, None] + np.log(vu)[:, None, :] - np.log(vw)[:, :, None]
    return np.einsum("ij,ik,ijk->i", pw, pu, np.exp(np.minimum(l, 0.0)))


def noisy_birth_death(target: Target, theta: float, weights: WeightModel, N: int = 1,
                      label: str = "") -> BirthDeathChain:
    """Exact p(m) = theta alpha~(m, m+1), q(m) = (1 - theta) alpha~(m, m-1).

    ``target`` lives on the positive integers and the proposal is the integer
    walk moving up with probability ``theta``. Weights must be enumerable.
    """
    if target.support != "positive_integers":
        raise ValueError("birth-death analysis needs a target on the positive integers")
    if not weights.enumerable:
        raise UnsupportedOperationError(f"{weights.family} weights cannot be enumerated")
    log_up = math.log((1 - theta) / theta)

    def alpha(m, y):
        lr = _log_target(target, y) - _log_target(target, m) + np.where(y > m, log_up, -log_up)
        if isinstance(weights, BinomialAverage):
            return _noisy_acceptance_two_point(weights, N, m, y, lr)
        if isinstance(weights, UnitWeights):
            return np.exp(np.minimum(lr, 0.0))
        out = np.empty(len(m))
        for i, (a, b, r) in enumerate(zip(m, y, lr)):
            vw, pw = weights.atoms(int(a), N)
            vu, pu = weights.atoms(int(b), N)
            l = r + np.log(vu)[None, :] - np.log(vw)[:, None]
            out[i] = np.sum(pw[:, None] * pu[None, :] * np.exp(np.minimum(l, 0.0)))
        return out

    def p(m):
        m = np.asarray(m, dtype=np.int64)
        return theta * alpha(m, m + 1)

    def q(m):
        m = np.asarray(m, dtype=np.int64)
        out = np.zeros(len(m))
        inside = m >= 2
        out[inside] = (1 - theta) * alpha(m[inside], m[inside] - 1)
        return out

    period = 3 if isinstance(weights, BinomialAverage) and "cyclic" in (weights.b.kind, weights.eps.kind) else 1
    source = "exact-marginal" if isinstance(weights, UnitWeights) else "exact-noisy"
    return BirthDeathChain(p, q, source=source, period=period, label=label)


def marginal_birth_death(target: Target, theta: float, label: str = "") -> BirthDeathChain:
    return noisy_birth_death(target, theta, UnitWeights(), 1, label=label)


def constant_birth_death(p: float, q: float, p1: float | None = None) -> BirthDeathChain:
    """Homogeneous walk with q(1) = 0 and p(1) = p1 (default p)."""
    p1 = p if p1 is None else p1

    def pf(m):
        m = np.asarray(m)
        return np.where(m == 1, p1, p) * np.ones(m.shape)

    return BirthDeathChain(pf, lambda m: np.full(np.shape(m), float(q)), source="user-table",
                          label=f"constant(p={p:g},q={q:g})")


def table_birth_death(m, p, q, label: str = "") -> BirthDeathChain:
    """Chain from explicit rows m = 1..K; the last row is repeated for m > K."""
    m = np.asarray(m, dtype=np.int64)
    order = np.argsort(m)
    m, p, q = m[order], np.asarray(p, float)[order], np.asarray(q, float)[order]
    if m[0] != 1 or np.any(np.diff(m) != 1):
        raise InvalidChainError("table rows must cover m = 1, 2, ..., K without gaps")

    def lookup(vals):
        return lambda s: vals[np.clip(np.asarray(s) - 1, 0, len(vals) - 1)]

    return BirthDeathChain(lookup(p), lookup(q), source="user-table", label=label)


def read_birth_death_csv(path) -> BirthDeathChain:
    """Read a CSV with header columns m, p, q."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"m", "p", "q"} <= set(rows[0]):
        raise InvalidChainError(f"{path}: expected columns m, p, q")
    return table_birth_death([int(r["m"]) for r in rows], [float(r["p"]) for r in rows],
                             [float(r["q"]) for r in rows], label=str(path))


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def _series(log_terms: np.ndarray, tol: float) -> dict:
    """Three-valued convergence test of sum(exp(log_terms)) on a finite truncation."""
    log_partial = np.logaddexp.accumulate(log_terms)
    half = len(log_terms) // 2
    log_increment = float(logsumexp(log_terms[half:]))
    tail_min = float(np.min(log_terms[half:]))
    if log_increment < math.log(tol):
        status = "converges"
    elif tail_min > math.log(TERM_FLOOR) or log_increment > math.log(DIVERGENCE_LEVEL):
        status = "diverges"
    else:
        status = "inconclusive"
    checkpoints = sorted({min(len(log_terms), 10**k) for k in range(1, 8)} | {len(log_terms)})
    return {
        "status": status,
        "log_partial_sum": float(log_partial[-1]),
        "partial_sum": float(math.exp(min(log_partial[-1], 700.0))),
        "cauchy_increment": math.exp(min(log_increment, 700.0)),
        "log_partial_sums_at": {str(c + 1): float(log_partial[c - 1]) for c in checkpoints},
    }


def _richardson_limits(values: np.ndarray, period: int) -> list[float]:
    """Per-residue-class limits assuming f(m) = L + c/m + o(1/m)."""
    M = len(values)
    out = []
    for r in range(period):
        m2 = M - ((M - r) % period)
        m1 = M // 2 - ((M // 2 - r) % period)
        if m1 < 2 or m2 <= m1:
            out.append(float(values[m2 - 1]))
            continue
        f1, f2 = values[m1 - 1], values[m2 - 1]
        # probabilities, so clip extrapolation overshoot
        out.append(float(np.clip((m2 * f2 - m1 * f1) / (m2 - m1), 0.0, 1.0)))
    return out


def classify(chain: BirthDeathChain, M: int = DEFAULT_M, tol: float = DEFAULT_TOL) -> WalkClassification:
    """Recurrence / positive recurrence / geometric ergodicity from the series criteria."""
    if M < 1000:
        raise ValueError("truncation M must be at least 1000")
    p, q = chain.table(M)
    if np.any(p[1:] <= 0):
        m_bad = int(np.argmax(p[1:] <= 0)) + 2
        raise InvalidChainError(f"p({m_bad}) = 0: the chain cannot move up from {m_bad}")
    if p[0] <= 0:
        raise InvalidChainError("p(1) must be positive")
    if np.any(q[1:] < 0) or np.any(p + q > 1 + 1e-12):
        raise InvalidChainError("probabilities must satisfy p, q >= 0 and p + q <= 1")
    with np.errstate(divide="ignore"):
        log_p, log_q = np.log(p), np.log(q)

    # products start at i = 2 (q(1) = 0)
    rec = _series(np.cumsum(log_q[1:] - log_p[1:]), tol)
    pos = _series(np.cumsum(log_p[:-1] - log_q[1:]), tol)
    lim_p = _richardson_limits(p, chain.period)
    lim_q = _richardson_limits(q, chain.period)
    P = chain.period
    n_periods = (M - 1) // P
    log_c = log_q[1:] - log_p[1:]
    tail = log_c[len(log_c) - (n_periods // 2) * P:]
    per_period = float(tail.reshape(-1, P).sum(axis=1).mean()) if len(tail) else float("nan")

    if rec["status"] == "converges":
        verdict = "transient"
    elif rec["status"] == "diverges":
        if pos["status"] == "converges":
            verdict = "geometrically-ergodic" if max(lim_p) < min(lim_q) - tol else "positive-recurrent"
        elif pos["status"] == "diverges":
            verdict = "recurrent-null"
        else:
            verdict = "inconclusive"
    else:
        verdict = "inconclusive"
    evidence = {
        "label": chain.label,
        "source": chain.source,
        "S_rec": rec,
        "S_pos": pos,
        "lim_p": lim_p,
        "lim_q": lim_q,
        "tail_log_ratio_per_period": per_period,
        "period": P,
        "p_head": p[:6].tolist(),
        "q_head": q[:6].tolist(),
    }
    return WalkClassification(verdict, evidence, M, tol)


# ---------------------------------------------------------------------------
# named checks
# ---------------------------------------------------------------------------


@dataclass
class RatioOrderingReport:
    k: float
    difference: Estimate
    inequality_holds: bool | None
    classification: WalkClassification | None
    p_q: tuple[float, float] = (float("nan"), float("nan"))

    @property
    def passed(self) -> bool:
        return bool(self.inequality_holds) and self.classification is not None \
            and self.classification.verdict == "geometrically-ergodic"

    def to_json(self):
        return {
            "k": self.k,
            "difference": self.difference.value,
            "stderr": self.difference.stderr,
            "inequality_holds": self.inequality_holds,
            "p_q_tail": list(self.p_q),
            "classification": self.classification.to_json() if self.classification else None,
            "passed": self.passed,
        }


def verify_ratio_ordering(weights: WeightModel, target: Target | None = None, k: float | None = None,
                 N: int = 1, draws: int = 10**6, gen: np.random.Generator | None = None,
                 z_threshold: float = 5.0, m_cap: int = 50, M: int = DEFAULT_M) -> RatioOrderingReport:
    """Check E[min{1, kZ}] > E[min{1, Z/k}] for Z = W1/W2 and classify the induced chain.

    The symmetric integer walk (theta = 1/2) is used. Transition probabilities
    are estimated from one sample of Z for m <= ``m_cap`` and held constant
    beyond (exact for the geometric target, whose log-ratios do not depend on m).
    """
    if not weights.is_homogeneous:
        raise ValueError("verify_ratio_ordering needs homogeneous weights")
    target = target or geometric_target(0.5)
    if k is None:
        big = np.array([10_000, 10_001])
        lt = _log_target(target, big)
        k = math.exp(lt[0] - lt[1])
    gen = gen if gen is not None else np.random.default_rng(0)
    exact = weights.enumerable
    if exact:
        vw, pw = weights.atoms(1, N)
        log_z = (np.log(vw)[None, :] - np.log(vw)[:, None]).ravel()
        prob = (pw[:, None] * pw[None, :]).ravel()
    else:
        log_z = weights.log_sample_many(1, N, draws, gen) - weights.log_sample_many(1, N, draws, gen)
        prob = None

    def expect(log_scale):
        vals = np.exp(np.minimum(log_scale + log_z, 0.0))
        if exact:
            return Estimate(float(np.sum(prob * vals)))
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))), len(vals))

    if exact:
        diff = Estimate(expect(math.log(k)).value - expect(-math.log(k)).value)
    else:
        d = np.exp(np.minimum(math.log(k) + log_z, 0.0)) - np.exp(np.minimum(-math.log(k) + log_z, 0.0))
        diff = Estimate(float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d))), len(d))
    if abs(math.log(k)) < 1e-12:
        return RatioOrderingReport(k, diff, None, None)
    holds = diff.value > (z_threshold * diff.stderr if not exact else DEFAULT_TOL)

    theta = 0.5
    ms = np.arange(1, m_cap + 2)
    lt = _log_target(target, np.arange(0, m_cap + 3))
    cache: dict = {}

    def acc(lr):
        key = round(float(lr), 12)
        if key not in cache:
            cache[key] = expect(lr).value
        return cache[key]

    p_vals = np.array([theta * acc(lt[m + 1] - lt[m]) for m in ms])
    q_vals = np.array([0.0] + [(1 - theta) * acc(lt[m - 1] - lt[m]) for m in ms[1:]])

    def lookup(vals):
        return lambda s: vals[np.clip(np.asarray(s) - 1, 0, len(vals) - 1)]

    chain = BirthDeathChain(lookup(p_vals), lookup(q_vals), source="exact-noisy" if exact else "mc-noisy",
                          label=f"ratio-ordering({weights.family})")
    cls = classify(chain, M=M)
    return RatioOrderingReport(k, diff, holds, cls, (float(p_vals[-1]), float(q_vals[-1])))


@dataclass
class BinomialFamilyReport:
    theta: float
    rows: list = field(default_factory=list)

    def verdicts(self) -> dict:
        return {r["N"]: r["classification"].verdict for r in self.rows}

    def to_json(self):
        return {
            "theta": self.theta,
            "rows": [{**{k: v for k, v in r.items() if k != "classification"},
                      "classification": r["classification"].to_json()} for r in self.rows],
        }


def verify_binomial_family(b, eps, theta: float = 0.5, N_list=(1, 2, 5), M: int = DEFAULT_M,
                           tol: float = DEFAULT_TOL) -> BinomialFamilyReport:
    """Classify the noisy chain with binomial-average weights for each N.

    Also evaluates the limiting down/up ratio predicted from the epsilon
    ratios at m = M (meaningful when eps_{m-1}/eps_m converges) next to the
    exact q(M)/p(M).
    """
    weights = BinomialAverage(Seq.from_json(b), Seq.from_json(eps))
    target = geometric_target(0.5)
    report = BinomialFamilyReport(theta)
    e = weights.eps
    em1, em, ep1 = e(M - 1), e(M), e(M + 1)
    predicted = ((1 - theta) * min(1.0, 2 * theta / (1 - theta) * em1 / em)) / (
        theta * min(1.0, (1 - theta) / (2 * theta) * ep1 / em))
    for N in N_list:
        chain = noisy_birth_death(target, theta, weights, N, label=f"binomial(N={N})")
        cls = classify(chain, M=M, tol=tol)
        pM, qM = chain.at(M)
        report.rows.append({
            "N": N,
            "classification": cls,
            "lim_gap": min(cls.evidence["lim_q"]) - max(cls.evidence["lim_p"]),
            "ratio_at_M": qM / pM,
            "predicted_limit_ratio": predicted,
        })
    return report


