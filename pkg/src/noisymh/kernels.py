"""Marginal, pseudo-marginal and noisy Metropolis-Hastings kernels.

All acceptance ratios are formed in log space as

    (log pi(y) + log u) - (log pi(x) + log w) + log q(y, x) - log q(x, y)

with ``log w = log u = 0`` for the marginal kernel, so a noisy or
pseudo-marginal kernel with unit weights performs bit-identical arithmetic
to the marginal one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ChainRng,
    Proposal,
    RejectedInputError,
    Target,
    UnsupportedOperationError,
    as_chain_rng,
    as_state,
)
from .weights import DEFAULT_DRAWS, Estimate, UnitWeights, WeightModel

KINDS = ("marginal", "pseudo_marginal", "noisy")


@dataclass(frozen=True)
class Kernel:
    """One of the three kernels bound to a target, proposal and weight model."""

    kind: str
    target: Target
    proposal: Proposal
    weights: WeightModel = field(default_factory=UnitWeights)
    N: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")
        if self.N < 1:
            raise ValueError("N must be >= 1")

    def with_kind(self, kind: str) -> "Kernel":
        return Kernel(kind, self.target, self.proposal, self.weights, self.N)

    # -- runner interface ---------------------------------------------------

    def initial_state(self, x0, rng: ChainRng):
        """(x, log pi(x), log w); log w is drawn from Q_{x0,N} for pseudo-marginal."""
        x = as_state(self.target, x0)
        lpx = self.target.log_pi(x)
        if not math.isfinite(lpx):
            raise RejectedInputError(f"initial state {x0!r} is off the support of {self.target.name}")
        lw = self.weights.log_sample(x, self.N, rng.weights) if self.kind == "pseudo_marginal" else None
        return (x, lpx, lw)

    def advance(self, state, rng: ChainRng):
        x, lpx, lw = state
        y, lpy, lu, acc, _, _ = self._transition(x, lpx, lw, rng)
        if acc:
            return (y, lpy, lu if self.kind == "pseudo_marginal" else None), True
        return state, False

    def _transition(self, x, lpx, lw, rng: ChainRng):
        """One proposal + accept/reject; returns (y, lpy, lu, accepted, lw_used, log_abar)."""
        y = self.proposal.propose(x, rng)
        v = rng.accept.uniform()
        lpy = self.target.log_pi(y)
        if not math.isfinite(lpy):
            return y, lpy, None, False, lw, -math.inf
        lq = self.proposal.log_ratio(x, y)
        if self.kind == "marginal":
            lw_x = lu = 0.0
        elif self.kind == "noisy":
            lw_x = self.weights.log_sample(x, self.N, rng.weights)
            lu = self.weights.log_sample(y, self.N, rng.weights)
        else:
            lw_x = lw
            lu = self.weights.log_sample(y, self.N, rng.weights)
        log_ratio = (lpy + lu) - (lpx + lw_x) + lq
        log_abar = min(0.0, log_ratio)
        acc = log_ratio >= 0.0 or v < math.exp(log_ratio)
        return y, lpy, lu, acc, lw_x, log_abar


# ---------------------------------------------------------------------------
# acceptance probabilities
# ---------------------------------------------------------------------------


def marginal_log_acceptance(target: Target, proposal: Proposal, x, y) -> float:
    """log min{1, pi(y) q(y,x) / (pi(x) q(x,y))}; -inf when y is off support."""
    lpx = target.log_pi(x)
    if not math.isfinite(lpx):
        raise RejectedInputError(f"current state {x!r} is off the support")
    lpy = target.log_pi(y)
    if not math.isfinite(lpy):
        return -math.inf
    return min(0.0, lpy - lpx + proposal.log_ratio(x, y))


def marginal_acceptance(target: Target, proposal: Proposal, x, y) -> float:
    return math.exp(marginal_log_acceptance(target, proposal, x, y))


def weighted_acceptance(x, w: float, y, u: float, target: Target, proposal: Proposal) -> float:
    """Randomised acceptance probability min{1, pi(y) u q(y,x) / (pi(x) w q(x,y))}."""
    if not (w > 0 and u > 0):
        raise ValueError(f"weights must be strictly positive, got w={w!r}, u={u!r}")
    lpx = target.log_pi(x)
    if not math.isfinite(lpx):
        raise RejectedInputError(f"current state {x!r} is off the support")
    lpy = target.log_pi(y)
    if not math.isfinite(lpy):
        return 0.0
    log_ratio = (lpy + math.log(u)) - (lpx + math.log(w)) + proposal.log_ratio(x, y)
    return math.exp(min(0.0, log_ratio))


def noisy_acceptance(kernel: Kernel, x, y, mode: str = "auto", draws: int = 10**4,
                gen: np.random.Generator | None = None) -> Estimate:
    """E over independent W ~ Q_{x,N}, U ~ Q_{y,N} of the randomised acceptance."""
    la = marginal_log_acceptance(kernel.target, kernel.proposal, x, y)
    if kernel.kind == "marginal" or not math.isfinite(la):
        return Estimate(math.exp(la))
    lr = kernel.target.log_pi(y) - kernel.target.log_pi(x) + kernel.proposal.log_ratio(x, y)
    model = kernel.weights
    if mode == "auto":
        mode = "exact" if model.enumerable else "mc"
    if mode == "exact":
        if not model.enumerable:
            raise UnsupportedOperationError(f"{model.family} weights cannot be enumerated")
        vw, pw = model.atoms(x, kernel.N)
        vu, pu = model.atoms(y, kernel.N)
        l = lr + np.log(vu)[None, :] - np.log(vw)[:, None]
        return Estimate(float(np.sum(pw[:, None] * pu[None, :] * np.exp(np.minimum(l, 0.0)))))
    gen = gen if gen is not None else np.random.default_rng()
    lw = model.log_sample_many(x, kernel.N, draws, gen)
    lu = model.log_sample_many(y, kernel.N, draws, gen)
    vals = np.exp(np.minimum(lr + lu - lw, 0.0))
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(draws)), draws)


def marginal_rejection(target: Target, proposal: Proposal, x) -> float:
    """Rejection probability of the marginal kernel (finite neighbour sets only)."""
    return 1.0 - sum(p * marginal_acceptance(target, proposal, x, y) for y, p in proposal.neighbors(x))


def noisy_rejection(kernel: Kernel, x, mode: str = "auto", draws: int = 10**4,
              gen: np.random.Generator | None = None) -> Estimate:
    """1 - sum_y q(x, y) alpha~(x, y) over the proposal's neighbours."""
    total, var = 0.0, 0.0
    n = 0
    for y, p in kernel.proposal.neighbors(x):
        a = noisy_acceptance(kernel, x, y, mode=mode, draws=draws, gen=gen)
        total += p * a.value
        var += (p * a.stderr) ** 2
        n = max(n, a.draws)
    return Estimate(1.0 - total, math.sqrt(var), n)


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------


def marginal_step(kernel: Kernel, x, rng):
    """One marginal MH step: (next state, accepted)."""
    rng = as_chain_rng(rng)
    lpx = kernel.target.log_pi(x)
    if not math.isfinite(lpx):
        raise RejectedInputError(f"current state {x!r} is off the support")
    y, _, _, acc, _, _ = kernel.with_kind("marginal")._transition(x, lpx, None, rng)
    return (y if acc else x), acc


def noisy_step(kernel: Kernel, x, rng):
    """One noisy MH step with fresh weights at both x and the proposal.

    Returns ``(next, accepted, (w, u, abar))``; w and u are ``None`` when the
    proposal falls off the support and is rejected without drawing weights.
    """
    if kernel.kind != "noisy":
        raise ValueError("noisy_step needs a noisy kernel")
    rng = as_chain_rng(rng)
    lpx = kernel.target.log_pi(x)
    if not math.isfinite(lpx):
        raise RejectedInputError(f"current state {x!r} is off the support")
    y, _, lu, acc, lw, log_abar = kernel._transition(x, lpx, None, rng)
    diag = (None if lu is None else math.exp(lw), None if lu is None else math.exp(lu), math.exp(log_abar))
    return (y if acc else x), acc, diag


def pseudo_marginal_step(kernel: Kernel, x, w: float, rng):
    """One pseudo-marginal step from (x, w); returns ((next, weight), accepted).

    Only the proposal's weight is drawn; a rejection keeps the carried w.
    """
    if kernel.kind != "pseudo_marginal":
        raise ValueError("pseudo_marginal_step needs a pseudo-marginal kernel")
    if not w > 0:
        raise ValueError(f"carried weight must be positive, got {w!r}")
    rng = as_chain_rng(rng)
    lpx = kernel.target.log_pi(x)
    if not math.isfinite(lpx):
        raise RejectedInputError(f"current state {x!r} is off the support")
    y, _, lu, acc, _, _ = kernel._transition(x, lpx, math.log(w), rng)
    if acc:
        return (y, math.exp(lu)), True
    return (x, w), False


def step_acceptance_draws(kernel: Kernel, x, n: int, rng) -> np.ndarray:
    """Outcomes of ``n`` independent noisy/marginal steps from the fixed state x.

    Returns the proposed moves (y - x for integer states, or y) of accepted
    steps and zeros for rejections; used for exact-vs-simulated checks.
    """
    rng = as_chain_rng(rng)
    lpx = kernel.target.log_pi(x)
    out = np.zeros(n, dtype=np.int64 if kernel.target.discrete else float)
    for i in range(n):
        y, _, _, acc, _, _ = kernel._transition(x, lpx, None, rng)
        if acc:
            out[i] = y - x
    return out
